// SPDX-License-Identifier: Apache-2.0
#include <semgro/skilldb.hpp>

#include <doctest.h>

#include <algorithm>

using namespace semgro;

namespace
{

SkillEntry make(int level, int index, std::string semantic, std::vector<SkillId> plan = {}, std::set<std::string> names = {})
{
    return SkillEntry { { level, index }, std::move(semantic), std::move(names), std::move(plan) };
}

SkillDatabase small_db()
{
    return SkillDatabase::from_entries({
        make(1, 1, "walk to kitchencabinet", {}, { "kitchencabinet" }),
        make(1, 2, "open kitchencabinet", {}, { "kitchencabinet" }),
        make(1, 3, "grab apple", {}, { "apple" }),
        make(1, 4, "put apple in kitchencabinet", {}, { "apple", "kitchencabinet" }),
        make(2, 1, "put apple in kitchencabinet and close it", { { 1, 3 }, { 1, 1 }, { 1, 2 }, { 1, 4 } }, { "apple", "kitchencabinet" }),
        make(3, 1, "store the apple", { { 2, 1 } }, { "apple", "kitchencabinet" }),
    });
}

bool has_rule(std::vector<Violation> const& vs, std::string_view rule, SkillId id)
{
    return std::any_of(vs.begin(), vs.end(), [&](auto const& v) { return v.rule == rule && v.id == id; });
}

} // namespace

TEST_CASE("valid database has no violations and correct stats")
{
    auto const db = small_db();
    CHECK(validate(db).empty());
    CHECK(db.max_level() == 3);
    auto const s = stats(db);
    REQUIRE(s.levels.size() == 3);
    CHECK(s.levels[0].count == 4);
    CHECK(s.levels[0].mean_plan_length == 0.0);
    CHECK(s.levels[1].mean_plan_length == 4.0);
    CHECK(s.levels[2].count == 1);
    CHECK(render_stats(s).find("total") != std::string::npos);
}

TEST_CASE("each invariant rule is reported")
{
    auto const db = SkillDatabase::from_entries({
        make(1, 1, "grab apple"),
        make(1, 2, "  "),
        make(1, 3, "walk", { { 1, 1 } }),
        make(2, 1, "empty composite"),
        make(2, 2, "dangling", { { 1, 9 } }),
        make(3, 1, "skipping", { { 1, 1 } }),
        make(2, 3, "Grab Apple."),
        make(0, 1, "bad level"),
    });
    auto const vs = validate(db);
    CHECK(has_rule(vs, rules::EmptySemantic, { 1, 2 }));
    CHECK(has_rule(vs, rules::PrimitiveWithPlan, { 1, 3 }));
    CHECK(has_rule(vs, rules::CompositeWithoutPlan, { 2, 1 }));
    CHECK(has_rule(vs, rules::DanglingReference, { 2, 2 }));
    CHECK(has_rule(vs, rules::LevelSkip, { 3, 1 }));
    CHECK(has_rule(vs, rules::DuplicateSemantic, { 2, 3 }));
    CHECK(has_rule(vs, rules::BadId, { 0, 1 }));
}

TEST_CASE("expand reaches primitives in order")
{
    auto const db = small_db();
    auto const steps = db.expand(db.at({ 3, 1 }));
    CHECK(steps == std::vector<std::string> { "grab apple", "walk to kitchencabinet", "open kitchencabinet", "put apple in kitchencabinet" });
    CHECK(db.find_semantic("Store the Apple.") == db.find({ 3, 1 }));
}

TEST_CASE("serialization round-trips")
{
    auto const db = small_db();
    auto const text = serialize_database(db);
    CHECK(parse_database(text) == db);
    CHECK(serialize_database(parse_database(text)) == text);
}

TEST_CASE("parse errors carry line numbers")
{
    std::string const good = R"({"level":1,"index":1,"semantic":"grab apple","object_names":["apple"],"plan":[]})";
    SUBCASE("malformed json")
    {
        try
        {
            (void) parse_database(good + "\n{not json\n");
            FAIL("expected ParseError");
        }
        catch (ParseError const& e)
        {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("missing field")
    {
        try
        {
            (void) parse_database(good + "\n\n" + R"({"level":1,"index":2,"object_names":[],"plan":[]})");
            FAIL("expected ParseError");
        }
        catch (ParseError const& e)
        {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("duplicate id")
    {
        try
        {
            (void) parse_database(good + "\n" + good);
            FAIL("expected ParseError");
        }
        catch (ParseError const& e)
        {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("invariant violations surface as DatabaseError")
    {
        CHECK_THROWS_AS((void) parse_database(R"({"level":2,"index":1,"semantic":"x","object_names":[],"plan":[]})"), DatabaseError);
    }
}

TEST_CASE("observation records validate state keys")
{
    std::vector<ObservationRecord> records { { "s1", { "fridge", "apple" }, { { "fridge", "CLOSED" } } } };
    auto const text = serialize_observations(records);
    CHECK(parse_observations(text) == records);
    CHECK_THROWS_AS((void) parse_observations(R"({"snapshot_id":"x","object_names":["a"],"object_states":{"b":"ON"}})"), ParseError);
}
