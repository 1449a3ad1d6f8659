// SPDX-License-Identifier: Apache-2.0
#include <semgro/engine.hpp>
#include <semgro/policies.hpp>

#include <doctest.h>

using namespace semgro;

namespace
{

std::filesystem::path data(std::string const& rel)
{
    return std::filesystem::path(SEMGRO_DATA_DIR) / rel;
}

struct Kitchen
{
    SkillDatabase db = load_database(data("golden/kitchen_db.jsonl"));
    std::vector<TaskSpec> tasks = load_tasks(data("golden/kitchen_tasks.json"));
    WorldState world = load_world(data("worlds/kitchen.json"));
    HashEmbedder embedder;
    Retriever retriever { db, embedder };

    Environment env() const
    {
        Environment e;
        e.live = world;
        e.target_reset = world;
        e.training_reset = world;
        e.goals = tasks.front().goals;
        e.step_budget = tasks.front().step_budget;
        return e;
    }
    std::string instruction() const { return tasks.front().instructions.at(InstructionType::LongHorizon); }
};

std::vector<std::string> events(GroundingTrace const& t)
{
    std::vector<std::string> out;
    for (auto const& s: t.steps)
        out.push_back(s.event);
    return out;
}

SkillPrimitive prim(std::string const& text)
{
    return *parse_primitive(text);
}

} // namespace

TEST_CASE("modes and level filters")
{
    CHECK(parse_mode("SG_L") == Mode::SgL);
    CHECK_THROWS_AS(parse_mode("sg_x"), ConfigError);
    CHECK_FALSE(level_filter(Mode::SemGro, 4));
    CHECK(level_filter(Mode::SgL, 4)->hi == 1);
    CHECK(level_filter(Mode::SgH, 4)->lo == 4);
    CHECK(level_filter(Mode::SgM, 4)->lo == 2);
    CHECK(level_filter(Mode::SgM, 4)->hi == 3);
    CHECK_THROWS_AS(level_filter(Mode::SgM, 2), ConfigError);
    CHECK_THROWS_AS(check_config({ 0 }), ConfigError);
}

TEST_CASE("golden kitchen trajectory under scripted rules")
{
    Kitchen k;
    auto lm = std::make_shared<ScriptedBackend>("golden", load_rules(data("golden/kitchen_rules.json")));
    LmCritic critic(lm, std::make_shared<OraclePerception>());
    auto env = k.env();
    std::size_t seen = 0;
    auto const t = ground(k.instruction(), env, k.db, { *lm, k.retriever, k.embedder }, &critic, {},
                          [&](TraceStep const&) { ++seen; });
    INFO(serialize_trace(t));
    REQUIRE(t.outcome == Outcome::Done);
    CHECK(seen == t.steps.size());
    CHECK(events(t) == std::vector<std::string> { "refine", "pop", "execute", "refine", "pop" });
    REQUIRE(t.steps.size() == 5);

    auto const& first = t.steps[0];
    CHECK(first.generated == "put fruit in kitchen cabinet");
    REQUIRE(first.verdict);
    CHECK(first.verdict->tag == Verdict::NE);
    CHECK(first.verdict->feedback == "kitchen cabinet is closed, you need to open the kitchen cabinet");
    CHECK(first.verdict->cause == Cause::Observational);
    CHECK(first.refinement == "Open kitchen cabinet and put fruit in it");

    CHECK(t.steps[1].depth == 1);
    CHECK(t.steps[1].primitives.size() == 6);
    CHECK(t.steps[2].instruction == k.instruction());
    CHECK(t.steps[2].history == std::vector<std::string> { "open kitchen cabinet and put bananas in kitchen cabinet" });
    CHECK(t.steps[2].primitives.size() == 5);
    CHECK(t.steps[3].refinement == "Open the kitchen cabinet and put apple and peach in the kitchen cabinet");
    CHECK(t.steps[4].primitives.size() == 7);
    CHECK(t.goals_met == 3);
    CHECK(t.counters.all == 2);
    CHECK(t.counters.domain == 0);
    CHECK(check_trace(t).empty());
}

TEST_CASE("trace files round-trip and the checker catches tampering")
{
    Kitchen k;
    auto lm = std::make_shared<ScriptedBackend>("golden", load_rules(data("golden/kitchen_rules.json")));
    LmCritic critic(lm, std::make_shared<OraclePerception>());
    auto env = k.env();
    auto const t = ground(k.instruction(), env, k.db, { *lm, k.retriever, k.embedder }, &critic, {});
    auto const text = serialize_trace(t);
    auto const back = parse_trace(text);
    CHECK(back == t);
    CHECK(serialize_trace(back) == text);
    CHECK(trace_hash(back) == trace_hash(t));

    auto bad = t;
    bad.steps[0].verdict->tag = Verdict::E;
    bad.steps[0].executed = true;
    CHECK_FALSE(check_trace(bad).empty());

    bad = t;
    bad.steps[1].event = "execute"; // refinement frame kept after its success
    CHECK_FALSE(check_trace(bad).empty());

    bad = t;
    bad.steps[2].hash_before = "x";
    CHECK_FALSE(check_trace(bad).empty());

    bad = t;
    bad.max_depth = 0;
    CHECK_FALSE(check_trace(bad).empty());

    bad = t;
    bad.steps[0].dry_run_pure = false;
    CHECK_FALSE(check_trace(bad).empty());

    CHECK_THROWS_AS(parse_trace(text.substr(0, text.rfind("{\"counters\""))), ParseError);
    CHECK_THROWS_AS(parse_trace(""), ParseError);
}

TEST_CASE("refinement grammar")
{
    CHECK(scripted_refinement("put fruit in kitchen cabinet", "kitchen cabinet is closed, you need to open the kitchen cabinet")
          == "first open the kitchen cabinet, then put fruit in kitchen cabinet");
    CHECK(scripted_refinement("open fridge", "the fridge is already open, you do not need to open the fridge")
          == "open fridge, but do not open the fridge");
    CHECK(scripted_refinement("grab apple", "your hands are full, you need to put down an object")
          == "grab apple, keeping in mind that your hands are full, you need to put down an object");

    auto g = parse_refinement_text("first walk to the kitchen cabinet, then put bananas kitchencabinet");
    REQUIRE(g);
    CHECK(g->act == "walk to");
    CHECK(g->label == "kitchen cabinet");
    CHECK(g->skill == "put bananas kitchencabinet");
    g = parse_refinement_text("open fridge, but do not open the fridge");
    REQUIRE(g);
    CHECK(g->negative);
    CHECK_FALSE(parse_refinement_text("Open kitchen cabinet and put fruit in it"));

    // a later segment is blocked: the ones before it stay in front
    auto const feedback = "the sofa is not reachable from here, you need to walk to the bookshelf";
    auto const [lead, seg] = split_blocked("put magazine on bed and then sit on sofa and then turn on tv", feedback);
    CHECK(lead == "put magazine on bed");
    CHECK(seg == "sit on sofa");
    auto const text = scripted_refinement("put magazine on bed and then sit on sofa and then turn on tv", feedback);
    CHECK(text == "put magazine on bed and after that first walk to the bookshelf, then sit on sofa");
    g = parse_refinement_text(text);
    REQUIRE(g);
    CHECK(g->prefix == "put magazine on bed");
    CHECK(g->skill == "sit on sofa");
    CHECK(g->label == "bookshelf");
    CHECK(split_blocked("sit on sofa", feedback).first.empty());
}

TEST_CASE("target patches")
{
    Kitchen k;
    auto const know = PolicyKnowledge::from(k.tasks, k.world);
    CHECK(know.object_for("Kitchen Cabinet") == "kitchencabinet");

    std::vector<SkillPrimitive> const base { prim("walk bananas"), prim("grab bananas"), prim("walk kitchencabinet"),
                                             prim("put bananas kitchencabinet") };
    auto t = patch_target(base, *parse_refinement_text("first open the kitchen cabinet, then x"), know);
    REQUIRE(t.size() == 5);
    CHECK(t[3].primitive == prim("open kitchencabinet"));
    CHECK(t[3].pinned);

    // no walk is added; if one is needed the critic says so
    t = patch_target({ prim("put bananas kitchencabinet") }, *parse_refinement_text("first open the kitchen cabinet, then x"), know);
    REQUIRE(t.size() == 2);
    CHECK(t[0].primitive == prim("open kitchencabinet"));
    CHECK(t[0].pinned);

    // never mentioned: goes first
    t = patch_target({ prim("walk bananas"), prim("grab bananas") }, *parse_refinement_text("first open the fridge, then x"), know);
    REQUIRE(t.size() == 3);
    CHECK(t[0].primitive == prim("open fridge"));

    t = patch_target({ prim("open kitchencabinet") }, *parse_refinement_text("first walk to the kitchen cabinet, then x"), know);
    REQUIRE(t.size() == 2);
    CHECK(t[0].pinned);

    t = patch_target({ prim("put bananas kitchencabinet") }, *parse_refinement_text("first grab the bananas, then x"), know);
    REQUIRE(t.size() == 2);
    CHECK(t[0].primitive == prim("grab bananas"));

    t = patch_target(base, *parse_refinement_text("x, but do not walk to the bananas"), know);
    CHECK(t.size() == 3);
}

TEST_CASE("progress tracking and candidate ranking")
{
    Kitchen k;
    auto const& gt = k.tasks.front().ground_truth;
    std::vector<TargetStep> target;
    for (auto const& p: gt)
        target.push_back({ p, false });

    CHECK(remaining_target(target, {}).size() == gt.size());
    auto rest = remaining_target(target, resolve_primitives(k.db, "open kitchen cabinet and put bananas in kitchen cabinet"));
    REQUIRE_FALSE(rest.empty());
    CHECK(rest.front().primitive == prim("walk apple"));
    // a walk already taken since the last match is not asked for again
    rest = remaining_target(target, { prim("walk bananas"), prim("grab bananas"), prim("walk kitchencabinet") });
    CHECK(rest.front().primitive == prim("find kitchencabinet"));
    CHECK(remaining_target(target, gt).empty());

    auto const ranked = rank_candidates({ "put fruit in kitchen cabinet", "grab bananas",
                                          "open kitchen cabinet and put bananas in kitchen cabinet", "walk apple" },
                                        target, k.db);
    CHECK(ranked[0].semantic == "open kitchen cabinet and put bananas in kitchen cabinet");
    CHECK(ranked[0].covered == 3);
    CHECK(ranked[1].semantic == "grab bananas");
    CHECK_FALSE(ranked[2].fits);
}

TEST_CASE("scripted planner with the oracle critic grounds the task")
{
    Kitchen k;
    auto lm = std::make_shared<ScriptedBackend>("policy");
    install(*lm, std::make_shared<ScriptedPlanner>(k.db, PolicyKnowledge::from(k.tasks, k.world), 0.0));
    OracleCritic critic(k.db);
    auto env = k.env();
    auto const t = ground(k.instruction(), env, k.db, { *lm, k.retriever, k.embedder }, &critic, {});
    INFO(serialize_trace(t));
    CHECK(t.outcome == Outcome::Done);
    CHECK(t.goals_met == 3);
    CHECK(check_trace(t).empty());
    for (auto const& s: t.steps)
        if (s.executed)
            CHECK(s.execution_success); // oracle verdicts are sound
}

TEST_CASE("ablation modes bypass the critic")
{
    Kitchen k;
    auto lm = std::make_shared<ScriptedBackend>("policy");
    install(*lm, std::make_shared<ScriptedPlanner>(k.db, PolicyKnowledge::from(k.tasks, k.world), 0.0));
    for (auto mode: { Mode::SgL, Mode::SgM, Mode::SgH })
    {
        CAPTURE(to_string(mode));
        auto env = k.env();
        EngineConfig cfg;
        cfg.mode = mode;
        auto const t = run_ablation(k.instruction(), env, k.db, { *lm, k.retriever, k.embedder }, cfg);
        CHECK(t.outcome != Outcome::Error);
        CHECK(t.critic_id == "bypass");
        CHECK(check_trace(t).empty());
        for (auto const& s: t.steps)
            CHECK_FALSE(s.verdict);
    }
    auto env = k.env();
    CHECK_THROWS_AS(run_ablation(k.instruction(), env, k.db, { *lm, k.retriever, k.embedder }, {}), ConfigError);
}

TEST_CASE("guards end the episode")
{
    Kitchen k;
    // the critic never lets anything through, and the planner keeps proposing the same skill
    ScriptedBackend lm("stubborn", parse_rules(R"({"rules":[
        {"tag":"generator","pattern":"[\\s\\S]","response":"put fruit in kitchen cabinet"},
        {"tag":"retriever","pattern":"[\\s\\S]","response":"try harder"},
        {"tag":"critic","pattern":"[\\s\\S]","response":"Executable: no\nFeedback: no"}
    ]})"));
    auto shared = std::shared_ptr<LmBackend>(&lm, [](LmBackend*) {});
    LmCritic critic(shared, std::make_shared<OraclePerception>());

    EngineConfig cfg;
    cfg.max_depth = 2;
    cfg.no_progress_abort = false;
    auto env = k.env();
    auto t = ground(k.instruction(), env, k.db, { lm, k.retriever, k.embedder }, &critic, cfg);
    CHECK(t.outcome == Outcome::BudgetExhausted);
    CHECK(t.stop_reason == "max depth");
    CHECK(t.steps.size() == 3);
    CHECK(check_trace(t).empty());

    cfg.max_depth = 4;
    cfg.no_progress_abort = true;
    env = k.env();
    t = ground(k.instruction(), env, k.db, { lm, k.retriever, k.embedder }, &critic, cfg);
    CHECK(t.stop_reason == "no progress");
    CHECK(t.steps.size() == 2);
    CHECK(check_trace(t).empty());

    // a planner error ends the episode with the partial trace kept
    ScriptedBackend mute("mute");
    env = k.env();
    t = ground(k.instruction(), env, k.db, { mute, k.retriever, k.embedder }, &critic, {});
    CHECK(t.outcome == Outcome::Error);
    CHECK(t.stop_reason.find("no rule") != std::string::npos);
    CHECK(t.steps.empty());

    env = k.env();
    CHECK_THROWS_AS(ground(" ", env, k.db, { lm, k.retriever, k.embedder }, &critic, {}), ConfigError);
    CHECK_THROWS_AS(ground("x", env, k.db, { lm, k.retriever, k.embedder }, nullptr, {}), ConfigError);
}
