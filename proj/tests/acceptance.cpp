// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion.
// Exit 0 when the failing set equals --expect-red (empty by default).

#include <semgro/bootstrap.hpp>
#include <semgro/evalharness.hpp>
#include <semgro/scenario.hpp>

#include "metric_fixtures.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <set>

using namespace semgro;

namespace
{

std::filesystem::path data(std::string const& rel)
{
    return std::filesystem::path(SEMGRO_DATA_DIR) / rel;
}

class Stopwatch
{
  public:
    [[nodiscard]] double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - _start).count();
    }

  private:
    std::chrono::steady_clock::time_point _start = std::chrono::steady_clock::now();
};

struct Check
{
    bool pass = false;
    std::string detail;
};

// 1 ------------------------------------------------------------------------------

Check golden_replay()
{
    Stopwatch clock;
    auto const scenario = load_scenario_file(data("golden/kitchen_replay_scenario.json"));
    auto stack = build_ground_stack(scenario);
    HashEmbedder embedder;
    Retriever retriever(scenario.db, embedder);
    Environment env;
    env.live = scenario.target;
    env.target_reset = scenario.target;
    env.training_reset = scenario.training;
    env.goals = scenario.goals;
    env.step_budget = scenario.step_budget;
    auto const trace = ground(scenario.instruction, env, scenario.db, { *stack.lm, retriever, embedder },
                              stack.critic.get(), scenario.engine);
    auto const secs = clock.seconds();

    std::vector<std::string> bad;
    if (serialize_trace(trace) != read_file(data("golden/kitchen_trace.jsonl")))
        bad.emplace_back("trace differs from the golden file");
    auto const& s = trace.steps;
    if (s.size() < 3)
        bad.emplace_back(fmt::format("{} steps", s.size()));
    else
    {
        if (s[0].generated != "put fruit in kitchen cabinet" || !s[0].verdict || s[0].verdict->tag != Verdict::NE
            || s[0].verdict->feedback.find("closed") == std::string::npos)
            bad.emplace_back("first step is not the closed-cabinet NE");
        if (s[0].refinement != "Open kitchen cabinet and put fruit in it")
            bad.emplace_back("wrong refinement");
        if (s[1].depth != 1 || !s[1].execution_success || s[1].primitives.size() < 6 || s[1].primitives.size() > 7)
            bad.emplace_back("refined skill did not run 6-7 primitives");
        if (s[2].depth != 0 || s[2].instruction != trace.instruction)
            bad.emplace_back("no return to the root instruction");
    }
    if (trace.outcome != semgro::Outcome::Done)
        bad.emplace_back("not done");
    if (secs >= 2.0)
        bad.emplace_back("too slow");
    return { bad.empty(), fmt::format("{} steps, {:.3f} s{}{}", s.size(), secs, bad.empty() ? "" : ": ",
                                      fmt::join(bad, "; ")) };
}

// 2 ------------------------------------------------------------------------------

// Brute force written without the retriever: every entry scored from fresh embeddings, full sort.
double dot(EmbeddingVector const& a, EmbeddingVector const& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.dimension(); ++i)
        s += a.components()[i] * b.components()[i];
    return s;
}

std::string joined(std::set<std::string> const& names)
{
    std::string out;
    for (auto const& n: names)
        out += (out.empty() ? "" : " ") + n;
    return out;
}

Check retrieval_oracle()
{
    Stopwatch clock;
    std::mt19937_64 rng(20240611);
    // a small vocabulary so equal scores (and the tie-break) come up often
    std::vector<std::string> const verbs { "put", "grab", "open", "walk to", "switch on", "wash", "place" };
    std::vector<std::string> const objects { "apple", "fridge", "sink", "mug", "plate", "table", "cabinet", "lamp",
                                             "sofa", "bed", "peach", "tv" };
    auto pick = [&](auto const& v) { return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]; };
    auto phrase = [&] {
        auto const n = std::uniform_int_distribution<int>(1, 3)(rng);
        std::string t = pick(verbs) + " " + pick(objects);
        for (int i = 1; i < n; ++i)
            t += " and " + pick(objects);
        return t;
    };
    auto names = [&] {
        std::set<std::string> out;
        auto const n = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int i = 0; i < n; ++i)
            out.insert(pick(objects));
        return out;
    };

    HashEmbedder embedder;
    std::size_t cases = 0, mismatches = 0, largest = 0;
    for (int d = 0; d < 20; ++d)
    {
        auto const size = d == 0 ? 5000 : std::uniform_int_distribution<int>(1, 5000)(rng);
        largest = std::max<std::size_t>(largest, static_cast<std::size_t>(size));
        std::vector<SkillEntry> entries;
        std::map<int, int> next;
        for (int i = 0; i < size; ++i)
        {
            SkillEntry e;
            e.id.level = std::uniform_int_distribution<int>(1, 4)(rng);
            e.id.index = ++next[e.id.level];
            e.semantic = phrase();
            e.object_names = names();
            entries.push_back(std::move(e));
        }
        auto const db = SkillDatabase::from_entries(entries);
        Retriever retriever(db, embedder);
        std::vector<EmbeddingVector> sem;
        std::vector<std::optional<EmbeddingVector>> ctx;
        for (auto const& e: db.entries())
        {
            sem.push_back(embedder.embed(e.semantic));
            ctx.push_back(e.object_names.empty() ? std::nullopt
                                                 : std::optional<EmbeddingVector>(embedder.embed(joined(e.object_names))));
        }

        for (int q = 0; q < 50; ++q, ++cases)
        {
            auto const instruction = phrase();
            auto const observed = names();
            auto const k = std::uniform_int_distribution<std::size_t>(1, 25)(rng);
            std::optional<LevelRange> levels;
            if (q % 3 == 1)
            {
                auto const lo = std::uniform_int_distribution<int>(1, 4)(rng);
                levels = LevelRange { lo, std::uniform_int_distribution<int>(lo, 4)(rng) };
            }

            auto const query = embedder.embed(instruction);
            auto const qctx = observed.empty() ? std::nullopt : std::optional<EmbeddingVector>(embedder.embed(joined(observed)));
            struct Row
            {
                SkillEntry const* e;
                double s;
            };
            std::vector<Row> rows;
            for (std::size_t i = 0; i < db.size(); ++i)
            {
                auto const& e = db.entries()[i];
                if (levels && (e.id.level < levels->lo || e.id.level > levels->hi))
                    continue;
                double s = dot(query, sem[i]);
                if (qctx && ctx[i])
                    s += dot(*qctx, *ctx[i]);
                rows.push_back({ &e, s });
            }
            std::sort(rows.begin(), rows.end(), [](Row const& a, Row const& b) {
                if (a.s != b.s)
                    return a.s > b.s;
                if (a.e->id.level != b.e->id.level)
                    return a.e->id.level > b.e->id.level;
                if (a.e->semantic != b.e->semantic)
                    return a.e->semantic < b.e->semantic;
                return a.e->id < b.e->id;
            });
            rows.resize(std::min(rows.size(), k));

            auto const got = retriever.retrieve_top_k(instruction, observed, k, levels, false).entries;
            bool same = got.size() == rows.size();
            for (std::size_t i = 0; same && i < rows.size(); ++i)
                same = got[i].entry->id == rows[i].e->id && got[i].score == rows[i].s;
            mismatches += same ? 0 : 1;
        }
    }
    auto const secs = clock.seconds();
    return { mismatches == 0 && secs < 30.0,
             fmt::format("{} cases (largest db {}), {} mismatches, {:.1f} s", cases, largest, mismatches, secs) };
}

// 3 ------------------------------------------------------------------------------

Check integrity_fuzz()
{
    auto const base = load_database(data("suite/household_db.jsonl")).entries();
    std::mt19937_64 rng(77);
    auto index_of = [&](auto pred) {
        std::vector<std::size_t> ok;
        for (std::size_t i = 0; i < base.size(); ++i)
            if (pred(base[i]))
                ok.push_back(i);
        return ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
    };
    char const* const names[] = { rules::LevelSkip, rules::DanglingReference, rules::DuplicateSemantic,
                                  rules::PrimitiveWithPlan };
    std::map<std::string, std::size_t> flagged, total;
    std::vector<std::string> misses;
    for (int i = 0; i < 500; ++i)
    {
        auto entries = base;
        auto const kind = i % 4;
        std::string const want = names[kind];
        SkillId target;
        std::optional<SkillId> other;
        if (kind == 0)
        {
            // a plan step two or more levels down
            auto& e = entries[index_of([](SkillEntry const& e) { return e.id.level >= 3; })];
            auto const low = index_of([&](SkillEntry const& x) { return x.id.level <= e.id.level - 2; });
            e.plan[std::uniform_int_distribution<std::size_t>(0, e.plan.size() - 1)(rng)] = base[low].id;
            target = e.id;
        }
        else if (kind == 1)
        {
            auto& e = entries[index_of([](SkillEntry const& e) { return e.id.level >= 2; })];
            e.plan[std::uniform_int_distribution<std::size_t>(0, e.plan.size() - 1)(rng)] =
                SkillId { e.id.level - 1, 100000 + i };
            target = e.id;
        }
        else if (kind == 2)
        {
            auto const a = index_of([](SkillEntry const&) { return true; });
            auto b = a;
            while (b == a)
                b = index_of([](SkillEntry const&) { return true; });
            auto text = base[b].semantic;
            if (i % 8 == 2) // case and spacing must not hide a duplicate
            {
                std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::toupper(c); });
                text = "  " + text + " ";
            }
            entries[a].semantic = text;
            target = entries[a].id;
            other = base[b].id;
        }
        else
        {
            auto& e = entries[index_of([](SkillEntry const& e) { return e.id.level == 1; })];
            e.plan.push_back(base[index_of([&](SkillEntry const& x) { return x.id.level == 1 && x.id != e.id; })].id);
            target = e.id;
        }

        ++total[want];
        auto const found = validate(SkillDatabase::from_entries(std::move(entries)));
        bool hit = !found.empty();
        for (auto const& v: found)
            hit = hit && v.rule == want && (v.id == target || (other && v.id == *other));
        if (hit)
            ++flagged[want];
        else if (misses.size() < 3)
            misses.push_back(fmt::format("#{} {} at {}: got {} violations, first {}", i, want, target.str(),
                                         found.size(), found.empty() ? "-" : found.front().rule));
    }
    std::vector<std::string> parts;
    std::size_t hits = 0;
    for (auto const* n: names)
    {
        parts.push_back(fmt::format("{} {}/{}", n, flagged[n], total[n]));
        hits += flagged[n];
    }
    return { hits == 500, fmt::format("{}{}{}", fmt::join(parts, ", "), misses.empty() ? "" : "; ", fmt::join(misses, "; ")) };
}

// 4, 5 ---------------------------------------------------------------------------

SuiteResult run_scripted(std::filesystem::path const& file)
{
    auto const suite = load_suite(file);
    auto const catalog = load_catalog(suite);
    SuiteOptions options;
    options.seeds = suite.seeds;
    options.engine = suite.engine;
    return run_suite(expand_scenarios(suite, catalog), catalog, scripted_backends(suite.slip), options);
}

Check table4_direction()
{
    auto const r = run_scripted(data("suite/ablation.json"));
    auto const& a = r.report.aggregate;
    for (auto m: { Mode::SemGro, Mode::SgL, Mode::SgM, Mode::SgH })
        if (!a.contains(m))
            return { false, "a mode is missing from the suite" };
    auto const &g = a.at(Mode::SemGro), &l = a.at(Mode::SgL), &m = a.at(Mode::SgM), &h = a.at(Mode::SgH);
    std::vector<std::string> broken;
    auto need = [&](bool ok, std::string what) {
        if (!ok)
            broken.push_back(std::move(what));
    };
    need(l.exec >= m.exec + 5, "Exec L >= M+5");
    need(m.exec >= h.exec + 5, "Exec M >= H+5");
    need(h.plan >= m.plan + 5, "Plan H >= M+5");
    need(m.plan >= l.plan + 5, "Plan M >= L+5");
    need(std::abs(g.exec - l.exec) <= 5, "SemGro Exec within 5 of L");
    need(std::abs(g.plan - h.plan) <= 10, "SemGro Plan within 10 of H");
    auto const detail = fmt::format("{} scenarios; Exec SG {:.1f} L {:.1f} M {:.1f} H {:.1f}; Plan SG {:.1f} L {:.1f} "
                                    "M {:.1f} H {:.1f}",
                                    r.report.scenarios, g.exec, l.exec, m.exec, h.exec, g.plan, l.plan, m.plan, h.plan);
    return { broken.empty() && r.report.scenarios >= 30,
             broken.empty() ? detail : fmt::format("{}; not holding: {}", detail, fmt::join(broken, ", ")) };
}

Check table3_trend()
{
    auto const r = run_scripted(data("suite/trend.json"));
    auto const& rows = r.report.iterations;
    std::vector<ShiftDegree> const order { ShiftDegree::None, ShiftDegree::Small, ShiftDegree::Medium, ShiftDegree::Large };
    bool ok = rows.size() == order.size();
    std::vector<std::string> parts;
    for (std::size_t i = 0; ok && i < rows.size(); ++i)
    {
        ok = rows[i].degree == order[i] && rows[i].episodes >= 20;
        if (i > 0)
            ok = ok && rows[i].all >= rows[i - 1].all && rows[i].domain >= rows[i - 1].domain;
        parts.push_back(fmt::format("{} n={} {:.2f}/{:.2f}", to_string(rows[i].degree), rows[i].episodes, rows[i].all,
                                    rows[i].domain));
    }
    ok = ok && !rows.empty() && rows.front().domain == 0.0;
    return { ok, fmt::format("all/domain: {}", fmt::join(parts, ", ")) };
}

// 6 ------------------------------------------------------------------------------

Check metric_oracle()
{
    auto const all = fixture::fixtures();
    auto const specs = fixture::fixture_specs();
    // SR, CGC, Plan, Exec counted by hand
    double const want[6][4] { { 100, 100, 100, 100 }, { 100, 100, 100, 50 }, { 0, 50, 400.0 / 6.0, 50 },
                              { 0, 0, 0, 0 },         { 100, 100, 100, 0 },  { 100, 100, 0, 50 } };
    std::size_t wrong = 0;
    auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
    for (std::size_t i = 0; i < all.size(); ++i)
    {
        auto const v = compute_metrics({ all[i] }, specs).aggregate.at(Mode::SemGro);
        if (!same(v.sr, want[i][0]) || !same(v.cgc, want[i][1]) || !same(v.plan, want[i][2]) || !same(v.exec, want[i][3]))
            ++wrong;
    }
    auto const pooled = compute_metrics(all, specs).aggregate.at(Mode::SemGro);
    bool const pooledOk = same(pooled.sr, 400.0 / 6.0) && same(pooled.cgc, 75.0) && same(pooled.plan, 1100.0 / 18.0)
                          && same(pooled.exec, 500.0 / 9.0);
    return { wrong == 0 && pooledOk, fmt::format("{} fixtures, {} off; pooled SR {:.2f} CGC {:.2f} Plan {:.2f} Exec {:.2f}",
                                                 all.size(), wrong, pooled.sr, pooled.cgc, pooled.plan, pooled.exec) };
}

// 7, 9 ---------------------------------------------------------------------------

/// Stands in for the network model behind the replay cache; every call is counted.
class CountingBackend final: public LmBackend
{
  public:
    explicit CountingBackend(std::atomic<std::size_t>& calls): _calls(calls) {}
    std::string complete(CompletionRequest const&) override
    {
        ++_calls;
        throw LmError("counting double reached");
    }
    [[nodiscard]] std::string id() const override { return "counting"; }

  private:
    std::atomic<std::size_t>& _calls;
};

struct CiRun
{
    std::string report;
    std::vector<std::string> hashes;
    std::vector<EpisodeResult> episodes;
};

CiRun replay_ci(std::atomic<std::size_t>& calls)
{
    auto const suite = load_suite(data("suite/ci.json"));
    auto const catalog = load_catalog(suite);
    auto cache = std::make_shared<ReplayCache>();
    cache->load(data("suite/ci_cache.jsonl"));
    BackendFactory factory = [&calls, cache](ScenarioSpec const&, SuiteWorld const& world, std::uint64_t seed) {
        EpisodeBackends b;
        b.lm = std::make_shared<CachedBackend>(std::make_shared<CountingBackend>(calls), cache, CacheMode::Replay,
                                               planner_backend_id(world.id, seed));
        b.critic = std::make_unique<OracleCritic>(world.db);
        return b;
    };
    SuiteOptions options;
    options.seeds = suite.seeds;
    options.engine = suite.engine;
    auto result = run_suite(expand_scenarios(suite, catalog), catalog, factory, options);
    CiRun run;
    run.report = serialize_report(result.report, suite.name);
    for (auto const& e: result.episodes)
        run.hashes.push_back(e.scenario_id + " " + e.trace_hash);
    run.episodes = std::move(result.episodes);
    return run;
}

Check determinism(CiRun const& a, CiRun const& b, std::size_t calls)
{
    std::size_t errors = 0;
    for (auto const& e: a.episodes)
        errors += (e.setup_error || e.trace.outcome == semgro::Outcome::Error) ? 1 : 0;
    bool const ok = a.report == b.report && a.hashes == b.hashes && calls == 0 && errors == 0 && a.episodes.size() == 24;
    return { ok, fmt::format("{} episodes, reports {}, trace hashes {}, {} errors, {} backend calls, digest {}",
                             a.episodes.size(), a.report == b.report ? "identical" : "differ",
                             a.hashes == b.hashes ? "identical" : "differ", errors, calls,
                             report_digest(a.report).substr(0, 16)) };
}

Check safety(std::vector<EpisodeResult> const& episodes)
{
    std::size_t violations = 0, steps = 0;
    std::string first;
    for (auto const& e: episodes)
    {
        auto found = check_trace(e.trace);
        for (auto const& s: e.trace.steps)
        {
            ++steps;
            if (s.depth > e.trace.max_depth)
                found.push_back(fmt::format("step {} depth {} over {}", s.index, s.depth, e.trace.max_depth));
            if (!s.dry_run_pure)
                found.push_back(fmt::format("step {} dry run touched the live world", s.index));
        }
        if (first.empty() && !found.empty())
            first = e.scenario_id + ": " + found.front();
        violations += found.size();
    }
    return { violations == 0 && !episodes.empty(),
             fmt::format("{} traces, {} steps, {} violations{}{}", episodes.size(), steps, violations,
                         first.empty() ? "" : "; ", first) };
}

// 8 ------------------------------------------------------------------------------

Check bootstrap_soundness()
{
    auto const w = load_world(data("worlds/kitchen.json"));
    ScriptedBackend lm("bootstrap");
    install_bootstrap_policies(lm, w);
    HashEmbedder embedder;
    BootstrapConfig cfg;
    cfg.levels = 3;
    cfg.seed = 3;
    auto const result = build_hierarchy(w, primitive_inventory(w), lm, embedder, cfg);
    auto const violations = validate(result.db);
    std::size_t composite = 0, runs = 0;
    for (auto const& e: result.db.entries())
    {
        if (e.id.level == 1)
            continue;
        ++composite;
        runs += dry_run(w, resolve_primitives(result.db, e.semantic)).success ? 1 : 0;
    }
    return { violations.empty() && result.db.max_level() >= 3 && composite > 0 && runs == composite,
             fmt::format("M={}, {} violations, {}/{} composite plans dry-run", result.db.max_level(), violations.size(),
                         runs, composite) };
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "acceptance checks" };
    std::vector<int> expectRed;
    app.add_option("--expect-red", expectRed, "criteria known to fail; exit 0 when exactly these fail");
    CLI11_PARSE(app, argc, argv);

    std::vector<std::pair<std::string, std::function<Check()>>> criteria;
    std::atomic<std::size_t> calls { 0 };
    std::optional<CiRun> first;
    criteria.emplace_back("golden trajectory replay", golden_replay);
    criteria.emplace_back("retrieval oracle equivalence", retrieval_oracle);
    criteria.emplace_back("database integrity fuzzing", integrity_fuzz);
    criteria.emplace_back("ablation direction", table4_direction);
    criteria.emplace_back("iteration trend over shift degrees", table3_trend);
    criteria.emplace_back("metric unit oracle", metric_oracle);
    criteria.emplace_back("determinism under replay", [&] {
        first = replay_ci(calls);
        auto const second = replay_ci(calls);
        return determinism(*first, second, calls.load());
    });
    criteria.emplace_back("bootstrap soundness", bootstrap_soundness);
    criteria.emplace_back("engine safety invariants", [&] {
        if (!first)
            first = replay_ci(calls);
        return safety(first->episodes);
    });

    std::set<int> red;
    for (std::size_t i = 0; i < criteria.size(); ++i)
    {
        auto const n = static_cast<int>(i + 1);
        Check o;
        Stopwatch clock;
        try
        {
            o = criteria[i].second();
        }
        catch (std::exception const& e)
        {
            o = { false, fmt::format("threw: {}", e.what()) };
        }
        if (!o.pass)
            red.insert(n);
        fmt::print("{} {} {} ({:.1f} s): {}\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, clock.seconds(), o.detail);
        std::fflush(stdout);
    }
    std::set<int> const expected(expectRed.begin(), expectRed.end());
    fmt::print("{}/{} criteria pass\n", criteria.size() - red.size(), criteria.size());
    if (red != expected)
        fmt::print("failing set {{{}}} differs from the expected {{{}}}\n", fmt::join(red, ","), fmt::join(expected, ","));
    return red == expected ? 0 : 1;
}
