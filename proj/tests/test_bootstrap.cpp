// SPDX-License-Identifier: Apache-2.0
#include <semgro/bootstrap.hpp>
#include <semgro/planner.hpp>

#include <doctest.h>

#include <chrono>

using namespace semgro;

namespace
{

std::filesystem::path data(std::string const& rel)
{
    return std::filesystem::path(SEMGRO_DATA_DIR) / rel;
}

SkillDatabase inventory_db(WorldState const& w)
{
    return SkillDatabase::from_entries(primitive_inventory(w));
}

} // namespace

TEST_CASE("level-1 inventory is combinatorial and valid")
{
    auto const w = load_world(data("worlds/kitchen.json"));
    auto const inv = primitive_inventory(w);
    auto const db = SkillDatabase::from_entries(inv);
    CHECK(validate(db).empty());
    CHECK(db.find_semantic("put apple kitchencabinet"));
    CHECK(db.find_semantic("open fridge"));
    CHECK_FALSE(db.find_semantic("grab fridge"));
    CHECK_FALSE(db.find_semantic("put apple apple"));
    for (auto const& e: inv)
        CHECK(parse_primitive(e.semantic));
}

TEST_CASE("chainer and summarizer prompts round-trip")
{
    auto const p = build_chainer_prompt({ "wash the plate", "wash mug" }, { "wash the plate" });
    CHECK(p.ends_with("Skill Library: wash the plate, wash mug\nSkill Steps: 1. wash the plate 2."));
    auto const q = parse_chainer_prompt(p);
    CHECK(q.library == std::vector<std::string> { "wash the plate", "wash mug" });
    CHECK(q.steps == std::vector<std::string> { "wash the plate" });
    auto const s = build_summarizer_prompt({ "wash the plate", "wash mug" });
    CHECK(s.ends_with("Skill Steps: 1. wash the plate 2. wash mug\nSummary:"));
    CHECK(parse_summarizer_prompt(s) == std::vector<std::string> { "wash the plate", "wash mug" });
    CHECK_THROWS_AS(build_chainer_prompt({}, {}), Error);
}

TEST_CASE("chaining episodes")
{
    auto const w = load_world(data("worlds/kitchen.json"));
    auto const db = inventory_db(w);

    // a chainer that always walks to the sink after the first step, then stops
    ScriptedBackend lm("chain", parse_rules(R"({"rules":[
        {"tag":"chainer","pattern":"Skill Steps: 1\\. [^\\n]* 2\\.$","response":"walk sink"},
        {"tag":"chainer","pattern":"[\\s\\S]","response":"end"},
        {"tag":"summarizer","pattern":"2\\. walk sink\\nSummary:$","response":"Summary: visit the sink"}
    ]})"));
    std::vector<ObservationRecord> records;
    auto ep = chain_skills(w, db, 1, lm, 4, 7, &records);
    CHECK(ep.success);
    REQUIRE(ep.steps.size() == 2);
    CHECK(ep.steps[1] == "walk sink");
    CHECK(ep.observations.size() == 2);
    CHECK(records.size() == 2);
    CHECK(ep.object_names.contains("sink"));
    CHECK(summarize_chain(lm, ep) == "visit the sink");

    // max_steps = 1 never asks the LM
    ScriptedBackend mute("mute");
    ep = chain_skills(w, db, 1, mute, 1, 7);
    CHECK(ep.success);
    CHECK(ep.steps.size() == 1);
    CHECK_THROWS_AS(summarize_chain(mute, ep), Error);

    // nothing is executable at the reset: the first step fails
    auto const blocked = SkillDatabase::from_entries({ { { 1, 1 }, "put salmon microwave", {}, {} } });
    ep = chain_skills(w, blocked, 1, mute, 3, 1);
    CHECK_FALSE(ep.success);
    CHECK(ep.steps.size() == 1);
    CHECK_FALSE(ep.failure_reason.empty());

    // a chainer naming something outside the library is an LM error
    ScriptedBackend wild("wild", parse_rules(R"({"rules":[{"tag":"chainer","pattern":"[\\s\\S]","response":"fly to the moon"}]})"));
    CHECK_THROWS_AS(chain_skills(w, db, 1, wild, 3, 1), UnparseableOutputError);
}

TEST_CASE("summaries that repeat a step are rejected")
{
    ScriptedBackend lm("parrot", parse_rules(R"({"rules":[
        {"tag":"summarizer","pattern":"1\\. ([^\\n]*?) 2\\.","response":"$1"},
        {"tag":"summarizer","pattern":"[\\s\\S]","response":" "}
    ]})"));
    ChainEpisode ep;
    ep.success = true;
    ep.steps = { "wash the plate", "wash mug" };
    CHECK_THROWS_AS(summarize_chain(lm, ep), Error);
}

TEST_CASE("scripted policies build a sound hierarchy")
{
    auto const w = load_world(data("worlds/household.json"));
    ScriptedBackend lm("bootstrap");
    install_bootstrap_policies(lm, w);
    HashEmbedder embedder;
    BootstrapConfig cfg;
    cfg.levels = 4;
    cfg.budget = 120;
    auto const t0 = std::chrono::steady_clock::now();
    auto const result = build_hierarchy(w, primitive_inventory(w), lm, embedder, cfg);
    auto const ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("bootstrap took " << ms << " ms");
    for (auto const& r: result.levels)
        MESSAGE("level " << r.level << ": " << r.entries << " entries from " << r.episodes << " episodes ("
                         << r.failed << " failed, " << r.too_short << " short, " << r.degenerate << " degenerate, "
                         << r.duplicates << " dup)");
    CHECK(validate(result.db).empty());
    CHECK(result.db.max_level() == 4);
    for (auto const& e: result.db.entries())
    {
        if (e.id.level == 1)
            continue;
        CAPTURE(e.semantic);
        CHECK(dry_run(w, resolve_primitives(result.db, e.semantic)).success);
        CHECK_FALSE(e.object_names.empty());
    }
    for (int m = 2; m <= 4; ++m)
        for (auto const& e: result.db.entries())
            if (e.id.level == m && e.id.index <= 3)
                MESSAGE(e.id.str() << " " << e.semantic);
    CHECK_FALSE(result.observations.empty());
    CHECK(result.manifest.find("database_sha256") != std::string::npos);

    // reproducible
    auto const again = build_hierarchy(w, primitive_inventory(w), lm, embedder, cfg);
    CHECK(again.db == result.db);
    CHECK(again.manifest == result.manifest);
}

TEST_CASE("bootstrap guards")
{
    auto const w = load_world(data("worlds/kitchen.json"));
    ScriptedBackend lm("bootstrap");
    install_bootstrap_policies(lm, w);
    HashEmbedder embedder;
    BootstrapConfig cfg;
    cfg.levels = 1;
    CHECK_THROWS_AS(build_hierarchy(w, primitive_inventory(w), lm, embedder, cfg), ConfigError);
    cfg.levels = 2;
    CHECK_THROWS_AS(build_hierarchy(w, {}, lm, embedder, cfg), ConfigError);

    // M=2, budget 1, a chain that always works: exactly one entry which replays
    ScriptedBackend sure("sure", parse_rules(R"({"rules":[
        {"tag":"chainer","pattern":"Skill Steps: 1\\. [^\\n]* 2\\.$","response":"walk sink"},
        {"tag":"chainer","pattern":"[\\s\\S]","response":"end"},
        {"tag":"summarizer","pattern":"[\\s\\S]","response":"wander to the sink"}
    ]})"));
    std::vector<SkillEntry> level1 { { { 1, 1 }, "walk fridge", { "fridge" }, {} }, { { 1, 2 }, "walk sink", { "sink" }, {} } };
    cfg.budget = 1;
    auto const r = build_hierarchy(w, level1, sure, embedder, cfg);
    REQUIRE(r.db.count(2) == 1);
    auto const& e = r.db.entries().back();
    CHECK(dry_run(w, resolve_primitives(r.db, e.semantic)).success);

    // the same summary twice keeps one entry
    cfg.budget = 3;
    auto const d = build_hierarchy(w, level1, sure, embedder, cfg);
    CHECK(d.db.count(2) == 1);
    CHECK(d.levels.front().duplicates == 2);

    // a level with nothing usable is reported
    ScriptedBackend quit("quit", parse_rules(R"({"rules":[{"tag":"chainer","pattern":"[\\s\\S]","response":"end"}]})"));
    CHECK_THROWS_AS(build_hierarchy(w, level1, quit, embedder, cfg), BootstrapError);
}
