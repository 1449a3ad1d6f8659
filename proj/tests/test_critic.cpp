// SPDX-License-Identifier: Apache-2.0
#include <semgro/critic.hpp>

#include <doctest.h>

using namespace semgro;

namespace
{

std::filesystem::path data(std::string const& rel)
{
    return std::filesystem::path(SEMGRO_DATA_DIR) / rel;
}

SkillDatabase fruit_db()
{
    std::vector<SkillEntry> e {
        { { 1, 1 }, "walk bananas", {}, {} },
        { { 1, 2 }, "grab bananas", {}, {} },
        { { 1, 3 }, "walk kitchencabinet", {}, {} },
        { { 1, 4 }, "put bananas kitchencabinet", {}, {} },
        { { 1, 5 }, "open kitchencabinet", {}, {} },
        { { 1, 6 }, "find kitchencabinet", {}, {} },
        { { 2, 1 },
          "put fruit in kitchen cabinet",
          { "bananas", "kitchen cabinet" },
          { { 1, 1 }, { 1, 2 }, { 1, 3 }, { 1, 4 } } },
        { { 2, 2 },
          "open kitchen cabinet and put bananas in kitchen cabinet",
          { "bananas", "kitchen cabinet" },
          { { 1, 1 }, { 1, 2 }, { 1, 3 }, { 1, 6 }, { 1, 5 }, { 1, 4 } } },
    };
    return SkillDatabase::from_entries(std::move(e));
}

} // namespace

TEST_CASE("oracle perception passes the observation through")
{
    auto const w = load_world(data("worlds/kitchen.json"));
    OraclePerception perception;
    auto const p = perception.perceive(observe(w));
    CHECK(p.object_names == observe(w).object_names);
    auto const states = render_perception_states(p);
    CHECK(states.find("fridge is OPEN") != std::string::npos);
    CHECK(states.find("microwave is CLOSED") != std::string::npos);
    CHECK(p.object_names.contains("salmon")); // inside the open fridge

    Perception empty;
    CHECK_NOTHROW(check_perception(empty));
    CHECK_THROWS_AS(check_perception({ { "a" }, { { "b", "OPEN" } } }), Error);
    CHECK_THROWS_AS(check_perception({ { "a" }, { { "a", "AJAR" } } }), Error);
}

TEST_CASE("verdict grammar")
{
    auto v = parse_verdict("Executable: yes\nFeedback: none");
    REQUIRE(v);
    CHECK(v->executable());
    CHECK(v->feedback.empty());
    CHECK(parse_verdict("executable: True"));
    v = parse_verdict("Executable: no\nFeedback: kitchen cabinet is closed, you need to open the kitchen cabinet");
    REQUIRE(v);
    CHECK(v->tag == Verdict::NE);
    CHECK(v->feedback == "kitchen cabinet is closed, you need to open the kitchen cabinet");
    CHECK_FALSE(parse_verdict("Executable: no"));
    CHECK_FALSE(parse_verdict("Executable: no\nFeedback: none"));
    CHECK_FALSE(parse_verdict("Executable: maybe\nFeedback: x"));
    CHECK_FALSE(parse_verdict("yes"));
    CHECK_FALSE(parse_verdict("Executable: yes\nFeedback: none\nmore"));
    CHECK_FALSE(parse_verdict(""));
}

TEST_CASE("critic prompt carries perception and optional lower skills")
{
    Perception p { { "bananas", "kitchen cabinet", "fridge" }, { { "kitchen cabinet", "CLOSED" }, { "fridge", "OPEN" } } };
    auto const prompt = build_critic_prompt("put fruit in kitchen cabinet", p, { "put peach in kitchen cabinet" });
    auto const q = parse_critic_prompt(prompt);
    CHECK(q.skill == "put fruit in kitchen cabinet");
    CHECK(q.objects == std::vector<std::string> { "bananas", "fridge", "kitchen cabinet" });
    CHECK(q.states == std::vector<std::string> { "fridge is OPEN", "kitchen cabinet is CLOSED" });
    CHECK(q.lower_skills == std::vector<std::string> { "put peach in kitchen cabinet" });
    CHECK(build_critic_prompt("x", p).find("low level skills") == std::string::npos);
    CHECK(parse_critic_prompt(build_critic_prompt("x", {})).objects.empty());
}

TEST_CASE("LM judge follows the table trajectory and retries malformed replies")
{
    ScriptedBackend lm("critic", parse_rules(R"({"rules":[
        {"tag":"critic","pattern":"kitchen cabinet is CLOSED[\\s\\S]*current skill: put fruit in kitchen cabinet$","response":"Executable: no\nFeedback: kitchen cabinet is closed, you need to open the kitchen cabinet"},
        {"tag":"critic","pattern":"current skill: garbled$","response":"I think so"},
        {"tag":"critic","pattern":"current skill: [^\\n]*$","response":"Executable: yes\nFeedback: none"}
    ]})"));
    Perception p { { "bananas", "kitchen cabinet" }, { { "kitchen cabinet", "CLOSED" } } };
    auto v = judge(lm, "put fruit in kitchen cabinet", p);
    CHECK(v.tag == Verdict::NE);
    CHECK(v.feedback == "kitchen cabinet is closed, you need to open the kitchen cabinet");
    v = judge(lm, "open kitchen cabinet and put bananas in kitchen cabinet", p);
    CHECK(v.executable());
    CHECK_THROWS_AS(judge(lm, "garbled", p), UnparseableVerdictError);
    CHECK_THROWS_AS(judge(lm, " ", p), Error);

    // a noun-presence rule as a deterministic judge
    ScriptedBackend nouns("nouns");
    nouns.add_handler(Purpose::Critic, [](CompletionRequest const& r) {
        auto const q = parse_critic_prompt(r.prompt);
        std::set<std::string> seen;
        for (auto const& o: q.objects)
            for (auto const& t: tokenize(o))
                seen.insert(t);
        for (auto const& t: tokenize(q.skill))
            if (t != "grab" && t != "walk" && !seen.contains(t))
                return std::optional<std::string>("Executable: no\nFeedback: cannot see the " + t);
        return std::optional<std::string>("Executable: yes\nFeedback: none");
    });
    CHECK(judge(nouns, "grab bananas", p).executable());
    CHECK(judge(nouns, "grab salmon", p).feedback == "cannot see the salmon");
}

TEST_CASE("oracle judge dry-runs without touching the world")
{
    auto const db = fruit_db();
    auto const w = load_world(data("worlds/kitchen.json"));
    auto const before = state_hash(w);

    auto v = oracle_judge(w, db, "put fruit in kitchen cabinet");
    CHECK(v.tag == Verdict::NE);
    CHECK(v.feedback == "kitchen cabinet is closed, you need to open the kitchen cabinet");
    CHECK(state_hash(w) == before);

    v = oracle_judge(w, db, "open kitchen cabinet and put bananas in kitchen cabinet");
    CHECK(v.executable());
    CHECK(oracle_judge(w, db, "walk bananas").executable());
    CHECK_THROWS_AS(oracle_judge(w, db, "fly away"), Error);

    // soundness: an E verdict means the real execution succeeds
    auto live = w;
    CHECK(execute_composite(live, db, "open kitchen cabinet and put bananas in kitchen cabinet").success);

    OracleCritic critic(db);
    Observation const obs = observe(w);
    std::vector<std::string> const lower;
    auto const report = critic.assess({ w, obs, lower }, "put fruit in kitchen cabinet");
    CHECK(report.dry_run_pure);
    CHECK_FALSE(report.perception);
}

TEST_CASE("cause classification separates domain from observation")
{
    auto const db = fruit_db();
    auto const train = load_world(data("worlds/kitchen.json"));

    // the training plan itself is blocked by the closed cabinet: observational
    CHECK(classify_cause(train, train, db, "put fruit in kitchen cabinet") == Cause::Observational);

    // bananas moved into the closed microwave: the plan that worked in training now fails
    auto target = train;
    auto& bananas = target.objects.at("bananas");
    bananas.parent = "microwave";
    bananas.relation = Relation::In;
    REQUIRE(check_world(target).empty());
    CHECK(classify_cause(train, target, db, "open kitchen cabinet and put bananas in kitchen cabinet") == Cause::Domain);
    CHECK(classify_cause(train, train, db, "open kitchen cabinet and put bananas in kitchen cabinet")
          == Cause::Observational);
}
