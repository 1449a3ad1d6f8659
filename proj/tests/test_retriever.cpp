// SPDX-License-Identifier: Apache-2.0
#include <semgro/retriever.hpp>

#include <doctest.h>

#include <algorithm>

using namespace semgro;

namespace
{

SkillDatabase kitchen_db()
{
    std::vector<SkillEntry> entries {
        { { 1, 1 }, "walk to fridge", { "fridge" }, {} },
        { { 1, 2 }, "open fridge", { "fridge" }, {} },
        { { 1, 3 }, "grab salmon", { "salmon" }, {} },
        { { 1, 4 }, "put salmon in fridge", { "salmon", "fridge" }, {} },
        { { 1, 5 }, "switchon tv", { "tv" }, {} },
        { { 2, 1 }, "put salmon in fridge", { "salmon", "fridge" }, { { 1, 3 }, { 1, 1 }, { 1, 2 }, { 1, 4 } } },
        { { 2, 2 }, "turn on tv", { "tv" }, { { 1, 5 } } },
    };
    return SkillDatabase::from_entries(std::move(entries));
}

} // namespace

TEST_CASE("hash embedder is unit norm and deterministic")
{
    HashEmbedder const e;
    auto const a = e.embed("Put the apple");
    auto const b = e.embed("put THE apple!");
    CHECK(cosine(a, b) == doctest::Approx(1.0));
    CHECK(cosine(a, a) == doctest::Approx(1.0));
    CHECK_THROWS_AS((void) e.embed(" ... "), Error);
    CHECK_THROWS_AS((void) cosine(a, HashEmbedder(8).embed("x")), Error);
}

TEST_CASE("score is instruction similarity plus object-context similarity")
{
    HashEmbedder const e;
    SkillEntry const entry { { 2, 1 }, "grab apple", { "apple", "kitchentable" }, {} };
    std::set<std::string> const observed { "kitchentable", "apple" };
    auto const s = score_entry(entry, "grab apple", observed, e);
    CHECK(s == doctest::Approx(2.0));
    CHECK(score_entry(entry, "grab apple", {}, e) == doctest::Approx(1.0));
}

TEST_CASE("top-k ordering, level filter and strictness")
{
    auto const db = kitchen_db();
    HashEmbedder const e;
    Retriever const r(db, e);

    auto const res = r.retrieve_top_k("put salmon in fridge", { "fridge", "salmon" }, 3);
    REQUIRE(res.entries.size() == 3);
    // exact semantic tie between (2,1) and (1,4) resolves to the higher level
    CHECK(res.entries[0].entry->id == SkillId { 2, 1 });
    CHECK(res.entries[1].entry->id == SkillId { 1, 4 });
    CHECK(std::is_sorted(res.entries.begin(), res.entries.end(), ranks_before));

    auto const onlyPrims = r.retrieve_top_k("put salmon in fridge", {}, 10, LevelRange { 1, 1 });
    CHECK(onlyPrims.entries.size() == 5);
    for (auto const& s: onlyPrims.entries)
        CHECK(s.entry->id.level == 1);

    CHECK(r.retrieve_top_k("x", {}, 100).entries.size() == db.size());

    SkillDatabase const empty;
    Retriever const re(empty, e);
    CHECK_THROWS_AS((void) re.retrieve_top_k("x", {}), Error);
    CHECK(re.retrieve_top_k("x", {}, 10, std::nullopt, false).entries.empty());
}

TEST_CASE("candidate sets")
{
    auto const db = kitchen_db();
    HashEmbedder const e;
    Retriever const r(db, e);
    auto const res = r.retrieve_top_k("put salmon in fridge", { "fridge", "salmon" }, 2);
    auto const sets = derive_candidate_sets(res, db);
    REQUIRE(sets.examples.size() == 2);
    CHECK(sets.examples[0].steps.size() == 4);
    CHECK(sets.examples[1].steps.empty());
    // plan semantics of (2,1) plus the level-1 entry itself, deduplicated
    CHECK(sets.candidates == std::vector<std::string> { "grab salmon", "walk to fridge", "open fridge", "put salmon in fridge" });
    CHECK(sets.lower_candidates.empty());
}
