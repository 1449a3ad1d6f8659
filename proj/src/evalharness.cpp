// SPDX-License-Identifier: Apache-2.0
#include <semgro/evalharness.hpp>
#include <semgro/policies.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace semgro
{

using json = nlohmann::ordered_json;

// Fixtures -------------------------------------------------------------------------

SuiteWorld::SuiteWorld(std::string id_, WorldState world_, SkillDatabase db_, std::vector<TaskSpec> tasks_):
    id(std::move(id_)), world(std::move(world_)), db(std::move(db_)), tasks(std::move(tasks_))
{
    retriever = std::make_unique<Retriever>(db, embedder);
}

TaskSpec const& SuiteWorld::task(std::string_view name) const
{
    auto const key = normalize_text(name);
    for (auto const& t: tasks)
        if (normalize_text(t.name) == key)
            return t;
    throw ConfigError(fmt::format("world '{}' has no task '{}'", id, name));
}

void check_scenario(ScenarioSpec const& spec, WorldCatalog const& catalog)
{
    if (trim(spec.instruction).empty())
        throw ConfigError(fmt::format("scenario '{}' has an empty instruction", spec.id));
    auto it = catalog.find(spec.world);
    if (it == catalog.end() || !it->second)
        throw ConfigError(fmt::format("scenario '{}' names unknown world '{}'", spec.id, spec.world));
    (void) it->second->task(spec.task.name);
}

std::uint64_t scenario_seed(std::uint64_t suite_seed, std::string_view scenario_id)
{
    return fnv1a64(fmt::format("{}|{}", suite_seed, scenario_id)) & 0xffffffffULL;
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t replica)
{
    return fnv1a64(fmt::format("{}#{}", seed, replica)) & 0xffffffffULL;
}

namespace
{
    void reject_unknown(json const& j, std::set<std::string> const& allowed, std::string_view where)
    {
        if (!j.is_object())
            throw ConfigError(fmt::format("{} must be an object", where));
        for (auto const& [key, value]: j.items())
            if (!allowed.contains(key))
                throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }

    std::string slug(std::string_view text)
    {
        std::string out;
        for (char c: normalize_text(text))
            out += std::isalnum(static_cast<unsigned char>(c)) ? c : '-';
        if (out.size() > 40) // long semantics keep a readable head and a short digest
            out = fmt::format("{}-{:06x}", out.substr(0, 32), fnv1a64(out) & 0xffffffULL);
        return out;
    }
} // namespace

SuiteDefinition parse_suite(std::string_view text, std::filesystem::path const& base_dir)
{
    json j;
    try
    {
        j = json::parse(text);
    }
    catch (json::parse_error const& e)
    {
        throw ParseError(fmt::format("suite is not valid JSON: {}", e.what()), 0);
    }
    reject_unknown(j, { "name", "seed", "seeds", "engine", "slip", "worlds", "shifts", "instruction_types", "modes" },
                   "suite");
    SuiteDefinition s;
    try
    {
        s.name = j.value("name", std::string("suite"));
        s.seed = j.value("seed", std::uint64_t { 1 });
        s.seeds = j.value("seeds", std::size_t { 1 });
        s.slip = j.value("slip", 0.1);
        if (j.contains("engine"))
        {
            auto const& e = j.at("engine");
            reject_unknown(e, { "k", "max_iterations", "max_depth", "no_progress_abort" }, "engine");
            s.engine.k = e.value("k", s.engine.k);
            s.engine.max_iterations = e.value("max_iterations", s.engine.max_iterations);
            s.engine.max_depth = e.value("max_depth", s.engine.max_depth);
            s.engine.no_progress_abort = e.value("no_progress_abort", s.engine.no_progress_abort);
        }
        for (auto const& w: j.at("worlds"))
        {
            reject_unknown(w, { "id", "world", "db", "tasks", "task_names" }, "worlds[]");
            SuiteDefinition::WorldFiles f;
            f.id = w.at("id").get<std::string>();
            f.world = base_dir / w.at("world").get<std::string>();
            f.db = base_dir / w.at("db").get<std::string>();
            f.tasks = base_dir / w.at("tasks").get<std::string>();
            f.task_names = w.value("task_names", std::vector<std::string> {});
            s.worlds.push_back(std::move(f));
        }
        for (auto const& sh: j.at("shifts"))
        {
            reject_unknown(sh, { "kind", "degree" }, "shifts[]");
            s.shifts.push_back({ parse_shift_kind(sh.at("kind").get<std::string>()),
                                 parse_shift_degree(sh.at("degree").get<std::string>()) });
        }
        for (auto const& t: j.at("instruction_types"))
            s.instruction_types.push_back(parse_instruction_type(t.get<std::string>()));
        for (auto const& m: j.value("modes", std::vector<std::string> { "semgro" }))
            s.modes.push_back(parse_mode(m));
    }
    catch (json::exception const& e)
    {
        throw ConfigError(fmt::format("malformed suite: {}", e.what()));
    }
    if (s.seeds == 0)
        throw ConfigError("suite needs at least one seed");
    check_config(s.engine);
    return s;
}

SuiteDefinition load_suite(std::filesystem::path const& path)
{
    return parse_suite(read_file(path), path.parent_path());
}

WorldCatalog load_catalog(SuiteDefinition const& suite)
{
    WorldCatalog out;
    for (auto const& f: suite.worlds)
    {
        if (out.contains(f.id))
            throw ConfigError(fmt::format("world id '{}' appears twice", f.id));
        out.emplace(f.id, std::make_shared<SuiteWorld>(f.id, load_world(f.world), load_database(f.db), load_tasks(f.tasks)));
    }
    return out;
}

std::vector<ScenarioSpec> expand_scenarios(SuiteDefinition const& suite, WorldCatalog const& catalog)
{
    std::vector<ScenarioSpec> out;
    for (auto const& f: suite.worlds)
    {
        auto const& w = *catalog.at(f.id);
        std::vector<TaskSpec const*> tasks;
        if (f.task_names.empty())
            for (auto const& t: w.tasks)
                tasks.push_back(&t);
        else
            for (auto const& n: f.task_names)
                tasks.push_back(&w.task(n));
        for (auto const* task: tasks)
            for (auto const& shift: suite.shifts)
                for (auto type: suite.instruction_types)
                    for (auto mode: suite.modes)
                    {
                        auto it = task->instructions.find(type);
                        if (it == task->instructions.end())
                            throw ConfigError(fmt::format("task '{}' has no {} instruction", task->name, to_string(type)));
                        ScenarioSpec s;
                        s.id = fmt::format("{}.{}.{}.{}-{}.{}", f.id, slug(task->name), to_string(type),
                                           to_string(shift.kind), to_string(shift.degree), to_string(mode));
                        s.world = f.id;
                        s.shift = shift;
                        // modes and phrasings of one task share the shifted world, so they compare
                        s.seed = scenario_seed(suite.seed, fmt::format("{}.{}.{}-{}", f.id, slug(task->name),
                                                                       to_string(shift.kind), to_string(shift.degree)));
                        s.task = *task;
                        s.instruction = it->second;
                        s.instruction_type = type;
                        s.mode = mode;
                        check_scenario(s, catalog);
                        out.push_back(std::move(s));
                    }
    }
    return out;
}

// Ground truth ---------------------------------------------------------------------

std::vector<SkillPrimitive> repair_ground_truth(WorldState const& world, std::vector<SkillPrimitive> const& demo,
                                                std::size_t max_fixes)
{
    static std::regex const need(R"(you need to (open|walk to|grab) the ([a-z0-9 ]+)$)");
    static std::regex const needless(R"(you do not need to)");
    auto w = world;
    std::vector<SkillPrimitive> out;
    std::deque<SkillPrimitive> pending(demo.begin(), demo.end());
    std::size_t fixes = 0;
    while (!pending.empty())
    {
        auto const p = pending.front();
        auto const r = apply(w, p);
        if (r.success)
        {
            out.push_back(p);
            pending.pop_front();
            continue;
        }
        if (fixes++ >= max_fixes)
            break;
        auto const reason = normalize_text(r.failure_reason);
        std::smatch m;
        if (std::regex_search(reason, needless))
        {
            pending.pop_front();
            continue;
        }
        if (!std::regex_search(reason, m, need))
            break;
        auto const* o = w.find_by_label(m[2].str());
        if (!o)
            break;
        auto const action = m[1].str() == "open" ? Action::Open : m[1].str() == "grab" ? Action::Grab : Action::Walk;
        SkillPrimitive fix { action, o->name, std::nullopt };
        if (fix == p)
            break;
        pending.push_front(fix);
    }
    out.insert(out.end(), pending.begin(), pending.end());
    return out;
}

// Episodes -------------------------------------------------------------------------

std::string planner_backend_id(std::string_view world, std::uint64_t seed)
{
    return fmt::format("scripted:policy/{}/{}", world, seed);
}

BackendFactory scripted_backends(double slip, std::shared_ptr<ReplayCache> cache, CacheMode mode)
{
    return [slip, cache, mode](ScenarioSpec const&, SuiteWorld const& world, std::uint64_t seed) {
        EpisodeBackends b;
        auto const id = planner_backend_id(world.id, seed);
        std::shared_ptr<LmBackend> scripted;
        if (!cache || mode == CacheMode::Record)
        {
            auto s = std::make_shared<ScriptedBackend>(id);
            install(*s, std::make_shared<ScriptedPlanner>(world.db, PolicyKnowledge::from(world.tasks, world.world), slip,
                                                          std::to_string(seed)));
            scripted = std::move(s);
        }
        b.lm = cache ? std::make_shared<CachedBackend>(scripted, cache, mode, id) : scripted;
        b.critic = std::make_unique<OracleCritic>(world.db);
        return b;
    };
}

namespace
{
    std::vector<std::string> strings(std::vector<SkillPrimitive> const& ps)
    {
        std::vector<std::string> out;
        for (auto const& p: ps)
            out.push_back(p.str());
        return out;
    }
} // namespace

EpisodeResult run_episode(ScenarioSpec const& spec, WorldCatalog const& catalog, std::uint64_t seed,
                          BackendFactory const& backends, EngineConfig const& engine)
{
    EpisodeResult r;
    r.scenario_id = spec.id;
    r.seed = seed;
    try
    {
        auto const& w = *catalog.at(spec.world);
        std::vector<std::string> focus;
        for (auto const& p: spec.task.ground_truth)
        {
            focus.push_back(p.object);
            if (p.target)
                focus.push_back(*p.target);
        }
        auto shifted = apply_shift(w.world, spec.shift.kind, spec.shift.degree, seed, w.db, focus);
        r.shift_fraction = shifted.fraction;
        r.perturbations = shifted.perturbations;
        r.ground_truth = strings(repair_ground_truth(shifted.state, spec.task.ground_truth));

        Environment env;
        env.live = shifted.state;
        env.target_reset = shifted.state;
        env.training_reset = w.world;
        env.goals = spec.task.goals;
        env.step_budget = spec.task.step_budget;

        auto b = backends(spec, w, seed);
        auto config = engine;
        config.mode = spec.mode;
        PlannerStack stack { *b.lm, *w.retriever, w.embedder };
        r.trace = spec.mode == Mode::SemGro ? ground(spec.instruction, env, w.db, stack, b.critic.get(), config)
                                            : run_ablation(spec.instruction, env, w.db, stack, config);
    }
    catch (std::exception const& e)
    {
        r.setup_error = e.what();
        r.trace = GroundingTrace {};
        r.trace.instruction = spec.instruction;
        r.trace.mode = spec.mode;
        r.trace.outcome = Outcome::Error;
        r.trace.stop_reason = e.what();
        r.trace.goals_total = spec.task.goals.size();
    }
    r.trace_hash = trace_hash(r.trace);
    return r;
}

// Metrics --------------------------------------------------------------------------

namespace
{
    struct Acc
    {
        std::size_t n = 0;
        std::size_t successes = 0;
        double cgc = 0.0;
        double plan = 0.0;
        std::size_t generated = 0;
        std::size_t ok = 0;
        std::size_t executed = 0;
        std::size_t itAll = 0;
        std::size_t itDomain = 0;
        std::size_t errors = 0;

        void add(EpisodeResult const& e)
        {
            auto const& t = e.trace;
            ++n;
            bool const all = t.goals_met == t.goals_total;
            successes += all ? 1 : 0;
            cgc += t.goals_total == 0 ? 1.0 : static_cast<double>(t.goals_met) / static_cast<double>(t.goals_total);
            auto const planned = planned_sequence(t);
            std::size_t lcp = 0;
            while (lcp < planned.size() && lcp < e.ground_truth.size() && planned[lcp] == e.ground_truth[lcp])
                ++lcp;
            plan += e.ground_truth.empty() ? 1.0 : static_cast<double>(lcp) / static_cast<double>(e.ground_truth.size());
            for (auto const& s: t.steps)
            {
                if (s.generated.empty())
                    continue;
                ++generated;
                if (s.executed)
                {
                    ++executed;
                    ok += s.execution_success ? 1 : 0;
                }
            }
            itAll += t.counters.all;
            itDomain += t.counters.domain;
            errors += (e.setup_error || t.outcome == Outcome::Error) ? 1 : 0;
        }

        [[nodiscard]] MetricValues values() const
        {
            auto pct = [](double num, double den) { return den == 0.0 ? 0.0 : 100.0 * num / den; };
            MetricValues v;
            v.episodes = n;
            v.successes = successes;
            v.sr = pct(static_cast<double>(successes), static_cast<double>(n));
            v.cgc = pct(cgc, static_cast<double>(n));
            v.plan = pct(plan, static_cast<double>(n));
            v.generated = generated;
            v.executed_ok = ok;
            v.executed = executed;
            v.exec = pct(static_cast<double>(ok), static_cast<double>(generated));
            v.exec_of_executed = pct(static_cast<double>(ok), static_cast<double>(executed));
            v.iterations_all = n == 0 ? 0.0 : static_cast<double>(itAll) / static_cast<double>(n);
            v.iterations_domain = n == 0 ? 0.0 : static_cast<double>(itDomain) / static_cast<double>(n);
            v.errors = errors;
            return v;
        }
    };

    std::vector<EpisodeResult const*> sorted(std::vector<EpisodeResult> const& episodes)
    {
        std::vector<EpisodeResult const*> out;
        for (auto const& e: episodes)
            out.push_back(&e);
        std::sort(out.begin(), out.end(), [](auto const* a, auto const* b) {
            return std::tie(a->scenario_id, a->seed) < std::tie(b->scenario_id, b->seed);
        });
        return out;
    }
} // namespace

std::vector<IterationRow> iteration_stats(std::vector<EpisodeResult> const& episodes,
                                          std::map<std::string, ShiftDegree> const& degree_of)
{
    std::map<ShiftDegree, Acc> by;
    for (auto const* e: sorted(episodes))
    {
        auto it = degree_of.find(e->scenario_id);
        if (it == degree_of.end())
            throw Error(fmt::format("no shift degree for scenario '{}'", e->scenario_id));
        by[it->second].add(*e);
    }
    std::vector<IterationRow> out;
    for (auto const& [degree, acc]: by)
    {
        auto const v = acc.values();
        out.push_back({ degree, v.episodes, v.iterations_all, v.iterations_domain });
    }
    return out;
}

MetricsReport compute_metrics(std::vector<EpisodeResult> const& episodes, std::vector<ScenarioSpec> const& specs)
{
    std::map<std::string, ScenarioSpec const*> byId;
    for (auto const& s: specs)
        byId.emplace(s.id, &s);

    MetricsReport report;
    std::map<std::tuple<Mode, InstructionType, ShiftKind>, Acc> cells;
    std::map<Mode, Acc> aggregate;
    std::set<std::string> ids;
    std::set<std::uint64_t> seeds;
    std::vector<EpisodeResult> semgro;
    std::map<std::string, ShiftDegree> degreeOf;

    for (auto const* e: sorted(episodes))
    {
        auto it = byId.find(e->scenario_id);
        if (it == byId.end())
            throw Error(fmt::format("spec/trace mismatch: no scenario '{}'", e->scenario_id));
        auto const& spec = *it->second;
        if (normalize_text(e->trace.instruction) != normalize_text(spec.instruction) || e->trace.mode != spec.mode)
            throw Error(fmt::format("spec/trace mismatch: trace of '{}' answers '{}' in mode {}", e->scenario_id,
                                    e->trace.instruction, to_string(e->trace.mode)));
        cells[{ spec.mode, spec.instruction_type, spec.shift.kind }].add(*e);
        aggregate[spec.mode].add(*e);
        ids.insert(spec.id);
        seeds.insert(e->seed);
        if (spec.mode == Mode::SemGro)
        {
            semgro.push_back(*e);
            degreeOf[spec.id] = spec.shift.degree;
        }
    }
    report.scenarios = ids.size();
    report.episodes = episodes.size();
    report.seeds.assign(seeds.begin(), seeds.end());
    for (auto const& [key, acc]: cells)
        report.cells.push_back({ std::get<0>(key), std::get<1>(key), std::get<2>(key), acc.values() });
    for (auto const& [mode, acc]: aggregate)
        report.aggregate[mode] = acc.values();
    report.iterations = iteration_stats(semgro, degreeOf);
    return report;
}

namespace
{
    double round4(double x)
    {
        return std::round(x * 1e4) / 1e4;
    }

    json values_json(MetricValues const& v)
    {
        return json { { "episodes", v.episodes },
                      { "successes", v.successes },
                      { "SR", round4(v.sr) },
                      { "CGC", round4(v.cgc) },
                      { "Plan", round4(v.plan) },
                      { "Exec", round4(v.exec) },
                      { "generated", v.generated },
                      { "executed", v.executed },
                      { "executed_ok", v.executed_ok },
                      { "exec_of_executed", round4(v.exec_of_executed) },
                      { "iterations_all", round4(v.iterations_all) },
                      { "iterations_domain", round4(v.iterations_domain) },
                      { "errors", v.errors } };
    }
} // namespace

std::string serialize_report(MetricsReport const& report, std::string_view suite_name)
{
    json j;
    j["schema"] = "semgro.report/1";
    j["suite"] = suite_name;
    j["metadata"] = {
        { "plan", "primitive-level longest common prefix against the oracle-repaired demonstration (fixture-relative)" },
        { "exec", "generation events whose skill executed successfully, over all generation events" },
        { "iterations", "NE verdicts per episode, SemGro mode only" },
    };
    j["scenarios"] = report.scenarios;
    j["episodes"] = report.episodes;
    j["seeds"] = report.seeds;
    j["aggregate"] = json::object();
    for (auto const& [mode, v]: report.aggregate)
        j["aggregate"][std::string(to_string(mode))] = values_json(v);
    j["cells"] = json::array();
    for (auto const& c: report.cells)
    {
        auto cell = json { { "mode", to_string(c.mode) }, { "instruction_type", to_string(c.type) }, { "shift", to_string(c.kind) } };
        cell.update(values_json(c.values));
        j["cells"].push_back(std::move(cell));
    }
    j["iterations"] = json::array();
    for (auto const& r: report.iterations)
        j["iterations"].push_back({ { "degree", to_string(r.degree) },
                                    { "episodes", r.episodes },
                                    { "all", round4(r.all) },
                                    { "domain", round4(r.domain) } });
    return j.dump(1) + "\n";
}

std::string report_digest(std::string const& serialized)
{
    return sha256_hex(serialized);
}

std::string render_grid(MetricsReport const& report)
{
    std::string out;
    std::set<Mode> modes;
    std::set<InstructionType> types;
    std::set<ShiftKind> kinds;
    for (auto const& c: report.cells)
    {
        modes.insert(c.mode);
        types.insert(c.type);
        kinds.insert(c.kind);
    }
    for (auto mode: modes)
    {
        out += fmt::format("[{}] SR/CGC/Plan\n", to_string(mode));
        out += fmt::format("{:<14}", "");
        for (auto k: kinds)
            out += fmt::format(" {:>20}", to_string(k));
        out += "\n";
        for (auto t: types)
        {
            out += fmt::format("{:<14}", to_string(t));
            for (auto k: kinds)
            {
                auto it = std::find_if(report.cells.begin(), report.cells.end(), [&](MetricsCell const& c) {
                    return c.mode == mode && c.type == t && c.kind == k;
                });
                out += it == report.cells.end()
                           ? fmt::format(" {:>20}", "-")
                           : fmt::format(" {:>20}", fmt::format("{:.1f}/{:.1f}/{:.1f}", it->values.sr, it->values.cgc,
                                                                 it->values.plan));
            }
            out += "\n";
        }
        if (auto it = report.aggregate.find(mode); it != report.aggregate.end())
        {
            auto const& v = it->second;
            out += fmt::format("overall SR {:.1f} CGC {:.1f} Plan {:.1f} Exec {:.1f} ({} episodes, {} errors)\n", v.sr,
                               v.cgc, v.plan, v.exec, v.episodes, v.errors);
        }
        out += "\n";
    }
    return out;
}

std::string render_iterations(std::vector<IterationRow> const& rows)
{
    if (rows.empty())
        return {};
    std::string head = fmt::format("{:<12}", "");
    std::string all = fmt::format("{:<12}", "Obs. & Dom.");
    std::string dom = fmt::format("{:<12}", "Dom.");
    for (auto const& r: rows)
    {
        head += fmt::format(" {:>7}", to_string(r.degree));
        all += fmt::format(" {:>7.2f}", r.all);
        dom += fmt::format(" {:>7.2f}", r.domain);
    }
    return head + "\n" + all + "\n" + dom + "\n";
}

// Suites ---------------------------------------------------------------------------

SuiteResult run_suite(std::vector<ScenarioSpec> const& specs, WorldCatalog const& catalog,
                      BackendFactory const& backends, SuiteOptions const& options)
{
    if (options.seeds == 0)
        throw ConfigError("a suite needs at least one seed");
    check_config(options.engine);
    for (auto const& s: specs)
        check_scenario(s, catalog);

    struct Job
    {
        ScenarioSpec const* spec;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (auto const& s: specs)
        for (std::size_t j = 0; j < options.seeds; ++j)
            jobs.push_back({ &s, replica_seed(s.seed, j) });

    SuiteResult result;
    result.episodes.resize(jobs.size());
    std::atomic<std::size_t> next { 0 };
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++)
            result.episodes[i] = run_episode(*jobs[i].spec, catalog, jobs[i].seed, backends, options.engine);
    };
    auto const threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(jobs.size(), 1));
    if (threads == 1)
        worker();
    else
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }

    std::sort(result.episodes.begin(), result.episodes.end(), [](EpisodeResult const& a, EpisodeResult const& b) {
        return std::tie(a.scenario_id, a.seed) < std::tie(b.scenario_id, b.seed);
    });
    if (options.trace_dir)
        for (auto const& e: result.episodes)
            write_file(*options.trace_dir / e.scenario_id / std::to_string(e.seed) / "trace.jsonl", serialize_trace(e.trace));
    result.report = compute_metrics(result.episodes, specs);
    return result;
}

// Task authoring -------------------------------------------------------------------

std::vector<GoalCondition> derive_goals(WorldState const& world, std::vector<SkillPrimitive> const& plan)
{
    auto after = world;
    auto const run = run_primitives(after, plan);
    if (!run.success)
        throw Error(fmt::format("plan fails at '{}': {}", run.failed_primitive ? run.failed_primitive->str() : "",
                                run.failure_reason));
    std::vector<GoalCondition> goals;
    std::set<std::string> seen;
    for (auto const& p: plan)
    {
        if (!seen.insert(p.object).second)
            continue;
        auto const& before = world.at(p.object);
        auto const& now = after.at(p.object);
        if (now.props.graspable && now.parent && (now.parent != before.parent || now.relation != before.relation))
            goals.push_back({ now.relation == Relation::In ? GoalKind::In : GoalKind::On, p.object, *now.parent });
    }
    for (auto const& [name, now]: after.objects)
    {
        auto const& before = world.at(name);
        if (now.open && before.open && *now.open != *before.open)
            goals.push_back({ GoalKind::State, name, *now.open ? "OPEN" : "CLOSED" });
        if (now.on && before.on && *now.on != *before.on)
            goals.push_back({ GoalKind::State, name, *now.on ? "ON" : "OFF" });
    }
    if (after.agent.sitting_on && after.agent.sitting_on != world.agent.sitting_on)
        goals.push_back({ GoalKind::Sitting, *after.agent.sitting_on, {} });
    for (auto const& h: after.agent.holding)
        if (!world.holding(h))
            goals.push_back({ GoalKind::Holding, h, {} });
    return goals;
}

std::map<InstructionType, std::string> phrase_instructions(std::string_view semantic, WorldState const& world)
{
    auto const s = normalize_skill_text(semantic);
    auto sentence = [](std::string t) {
        if (!t.empty())
            t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
        return t + ".";
    };

    // nouns: graspable objects become their class, repeated classes are said once
    std::vector<std::string> nouns;
    for (auto const& w: tokenize(s))
    {
        auto const* o = world.find(w);
        auto word = o && o->props.graspable ? o->cls : w;
        if (nouns.size() >= 2 && nouns.back() == "and" && nouns[nouns.size() - 2] == word)
        {
            nouns.pop_back();
            continue;
        }
        nouns.push_back(std::move(word));
    }

    auto verbs = s;
    for (auto const& [from, to]: std::vector<std::pair<std::string, std::string>> {
             { "and then", "and afterwards" }, { "put", "tidy" }, { "place", "tidy" }, { "take", "fetch" },
             { "turn on", "start" }, { "sit on", "relax on" }, { "pick up", "collect" }, { "go to", "visit" },
             { "open", "check" } })
        verbs = std::regex_replace(verbs, std::regex("\\b" + from + "\\b"), to);

    return {
        { InstructionType::AbstractNoun, sentence(join(nouns, " ")) },
        { InstructionType::AbstractVerb, sentence(verbs) },
        { InstructionType::Structured, sentence(s) },
        { InstructionType::LongHorizon, "I have some chores for you around the house. " + sentence(s) },
    };
}

std::vector<TaskSpec> author_tasks(SkillDatabase const& db, WorldState const& world, std::size_t count)
{
    std::vector<TaskSpec> out;
    auto const top = db.max_level();
    for (auto const& e: db.entries())
    {
        if (out.size() >= count)
            break;
        if (e.id.level != top)
            continue;
        TaskSpec t;
        t.name = e.semantic;
        try
        {
            t.ground_truth = resolve_primitives(db, e.semantic);
            t.goals = derive_goals(world, t.ground_truth);
        }
        catch (Error const&)
        {
            continue;
        }
        if (t.goals.empty())
            continue;
        t.step_budget = std::max<std::size_t>(60, 3 * t.ground_truth.size());
        t.instructions = phrase_instructions(e.semantic, world);
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace semgro
