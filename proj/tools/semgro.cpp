// SPDX-License-Identifier: Apache-2.0
// semgro: operator entry points (db, ground, eval, bootstrap, cache).

#include <semgro/bootstrap.hpp>
#include <semgro/evalharness.hpp>
#include <semgro/scenario.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <set>

using namespace semgro;
using json = nlohmann::json;

namespace
{

constexpr int ExitOk = 0;
constexpr int ExitError = 1;
constexpr int ExitIncomplete = 2;

// Config file ------------------------------------------------------------------------

struct CliConfig
{
    std::optional<std::size_t> k;
    std::optional<Mode> mode;
    std::optional<std::size_t> seeds;
    std::optional<std::size_t> parallel;
    std::optional<std::size_t> max_iterations;
    std::optional<std::size_t> max_depth;
    std::optional<LmSettings> lm;
    std::optional<CriticSettings> critic;
    std::optional<std::size_t> bootstrap_budget;
    std::optional<std::size_t> bootstrap_max_steps;
    std::optional<std::uint64_t> bootstrap_seed;
    std::optional<std::filesystem::path> out;
};

CliConfig load_config(std::filesystem::path const& path)
{
    auto const base = path.parent_path();
    json j;
    try
    {
        j = json::parse(read_file(path));
    }
    catch (json::parse_error const& e)
    {
        throw ConfigError(fmt::format("{}: not valid JSON: {}", path.string(), e.what()));
    }
    static std::set<std::string> const known { "k", "mode", "seeds", "parallel", "max_iterations", "max_depth", "lm",
                                               "critic", "bootstrap", "out" };
    if (!j.is_object())
        throw ConfigError(fmt::format("{}: config must be an object", path.string()));
    for (auto const& [key, v]: j.items())
        if (!known.contains(key))
            throw ConfigError(fmt::format("{}: unknown key '{}'", path.string(), key));
    CliConfig c;
    try
    {
        if (j.contains("k"))
            c.k = j["k"].get<std::size_t>();
        if (j.contains("mode"))
            c.mode = parse_mode(j["mode"].get<std::string>());
        if (j.contains("seeds"))
            c.seeds = j["seeds"].get<std::size_t>();
        if (j.contains("parallel"))
            c.parallel = j["parallel"].get<std::size_t>();
        if (j.contains("max_iterations"))
            c.max_iterations = j["max_iterations"].get<std::size_t>();
        if (j.contains("max_depth"))
            c.max_depth = j["max_depth"].get<std::size_t>();
        if (j.contains("lm"))
            c.lm = parse_lm_settings(j["lm"].dump(), base);
        if (j.contains("critic"))
            c.critic = parse_critic_settings(j["critic"].dump());
        if (j.contains("bootstrap"))
        {
            auto const& b = j["bootstrap"];
            for (auto const& [key, v]: b.items())
                if (key != "budget" && key != "max_steps" && key != "seed")
                    throw ConfigError(fmt::format("{}: unknown key 'bootstrap.{}'", path.string(), key));
            if (b.contains("budget"))
                c.bootstrap_budget = b["budget"].get<std::size_t>();
            if (b.contains("max_steps"))
                c.bootstrap_max_steps = b["max_steps"].get<std::size_t>();
            if (b.contains("seed"))
                c.bootstrap_seed = b["seed"].get<std::uint64_t>();
        }
        if (j.contains("out"))
            c.out = base / j["out"].get<std::string>();
    }
    catch (json::exception const& e)
    {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return c;
}

// db ---------------------------------------------------------------------------------

std::map<SkillId, std::size_t> id_lines(std::filesystem::path const& path)
{
    std::map<SkillId, std::size_t> out;
    auto const text = read_file(path);
    std::size_t lineNo = 0;
    for (auto const& line: split(text, '\n'))
    {
        ++lineNo;
        auto const j = json::parse(line, nullptr, false);
        if (!j.is_object())
            continue;
        if (j.contains("level") && j.contains("index") && j["level"].is_number_integer() && j["index"].is_number_integer())
            out.emplace(SkillId { j["level"].get<int>(), j["index"].get<int>() }, lineNo);
        else if (j.contains("id") && j["id"].is_array() && j["id"].size() == 2)
            out.emplace(SkillId { j["id"][0].get<int>(), j["id"][1].get<int>() }, lineNo);
    }
    return out;
}

struct DbArgs
{
    std::string action;
    std::filesystem::path file;
    std::optional<std::filesystem::path> world;
    std::size_t count = 10;
    std::optional<std::filesystem::path> out;
};

int cmd_db_tasks(DbArgs const& a)
{
    if (!a.world)
        throw ConfigError("db tasks needs --world");
    auto const db = load_database(a.file);
    auto const tasks = author_tasks(db, load_world(*a.world), a.count);
    auto const text = serialize_tasks(tasks);
    if (a.out)
    {
        write_file(*a.out, text);
        fmt::print("{} task(s) written to {}\n", tasks.size(), a.out->string());
    }
    else
        fmt::print("{}", text);
    return ExitOk;
}

int cmd_db(DbArgs const& a)
{
    if (a.action == "tasks")
        return cmd_db_tasks(a);
    auto const& action = a.action;
    auto const& file = a.file;
    SkillDatabase db;
    std::vector<Violation> violations;
    try
    {
        db = load_database(file);
        violations = validate(db);
    }
    catch (ParseError const& e)
    {
        fmt::print("{}: {}\n", file.string(), e.what());
        return ExitError;
    }
    catch (DatabaseError const& e)
    {
        // loading refuses a broken database; report what it found
        violations = e.violations();
    }
    if (action == "stats" && violations.empty())
        fmt::print("{}", render_stats(stats(db)));
    if (violations.empty())
    {
        if (action == "validate")
            fmt::print("{}: ok ({} entries, {} levels)\n", file.string(), db.size(), db.max_level());
        return ExitOk;
    }
    auto const lines = id_lines(file);
    for (auto const& v: violations)
    {
        auto it = lines.find(v.id);
        fmt::print("{}:{}: {} {}: {}\n", file.string(), it == lines.end() ? 0 : it->second, v.id.str(), v.rule, v.detail);
    }
    fmt::print("{} violation(s)\n", violations.size());
    return ExitError;
}

// ground -----------------------------------------------------------------------------

std::string describe(TraceStep const& s)
{
    auto const skill = s.event == "done" ? std::string("<done>") : s.generated;
    std::string verdict = "-";
    if (s.verdict)
        verdict = s.verdict->tag == Verdict::E ? "E" : fmt::format("NE ({})", s.verdict->feedback);
    std::string action = s.event;
    if (s.executed)
        action += s.execution_success ? fmt::format(" ok [{}]", join(s.primitives, ", "))
                                      : fmt::format(" failed: {}", s.failure_reason);
    if (s.refinement)
        action += fmt::format(" -> \"{}\"", *s.refinement);
    return fmt::format("{:>3} {} d{} | {} | {} | {} | {}", s.index, s.kind == FrameKind::Root ? "root" : "refn", s.depth,
                       s.instruction, skill, verdict, action);
}

struct GroundArgs
{
    std::string instruction;
    std::filesystem::path scenario;
    std::optional<std::string> mode;
    std::optional<std::size_t> k;
    std::optional<std::size_t> max_iterations;
    std::filesystem::path trace = "trace.jsonl";
    std::optional<std::filesystem::path> record;
};

int cmd_ground(GroundArgs const& a, CliConfig const& cfg)
{
    auto scenario = load_scenario_file(a.scenario);
    if (cfg.lm)
        scenario.lm = *cfg.lm;
    if (cfg.critic)
        scenario.critic = *cfg.critic;
    auto engine = scenario.engine;
    if (cfg.k)
        engine.k = *cfg.k;
    if (cfg.mode)
        engine.mode = *cfg.mode;
    if (cfg.max_iterations)
        engine.max_iterations = *cfg.max_iterations;
    if (cfg.max_depth)
        engine.max_depth = *cfg.max_depth;
    if (a.mode)
        engine.mode = parse_mode(*a.mode);
    if (a.k)
        engine.k = *a.k;
    if (a.max_iterations)
        engine.max_iterations = *a.max_iterations;
    check_config(engine);
    auto const instruction = a.instruction.empty() ? scenario.instruction : a.instruction;
    if (trim(instruction).empty())
        throw ConfigError("no instruction: pass --instruction or name a task in the scenario");

    auto stack = build_ground_stack(scenario, a.record.has_value());
    HashEmbedder embedder;
    Retriever retriever(scenario.db, embedder);
    Environment env;
    env.live = scenario.target;
    env.target_reset = scenario.target;
    env.training_reset = scenario.training;
    env.goals = scenario.goals;
    env.step_budget = scenario.step_budget;

    auto print = [](TraceStep const& s) {
        fmt::print("{}\n", describe(s));
        std::fflush(stdout);
    };
    PlannerStack planner { *stack.lm, retriever, embedder };
    auto const trace = engine.mode == Mode::SemGro
                           ? ground(instruction, env, scenario.db, planner, stack.critic.get(), engine, print)
                           : run_ablation(instruction, env, scenario.db, planner, engine, print);
    write_file(a.trace, serialize_trace(trace));
    if (a.record && stack.cache)
        stack.cache->export_file(*a.record);
    fmt::print("outcome: {} ({}), goals {}/{}, {} primitive steps, NE {} (domain {})\n", to_string(trace.outcome),
               trace.stop_reason, trace.goals_met, trace.goals_total, trace.primitive_steps, trace.counters.all,
               trace.counters.domain);
    fmt::print("trace: {} sha256 {}\n", a.trace.filename().string(), trace_hash(trace));
    switch (trace.outcome)
    {
    case Outcome::Done:
        return ExitOk;
    case Outcome::BudgetExhausted:
        return ExitIncomplete;
    case Outcome::Error:
        break;
    }
    return ExitError;
}

// eval -------------------------------------------------------------------------------

struct EvalArgs
{
    std::filesystem::path suite;
    std::optional<std::size_t> parallel;
    std::optional<std::size_t> seeds;
    std::optional<std::filesystem::path> out;
    std::string lm = "scripted";
    std::optional<std::filesystem::path> cache;
};

int cmd_eval(EvalArgs const& a, CliConfig const& cfg)
{
    auto const suite = load_suite(a.suite);
    auto const catalog = load_catalog(suite);
    auto const specs = expand_scenarios(suite, catalog);

    std::shared_ptr<ReplayCache> cache;
    BackendFactory factory;
    if (a.lm == "scripted")
        factory = scripted_backends(suite.slip);
    else if (a.lm == "record" || a.lm == "replay")
    {
        if (!a.cache)
            throw ConfigError(fmt::format("--lm {} needs --cache", a.lm));
        cache = std::make_shared<ReplayCache>();
        if (a.lm == "replay" || std::filesystem::exists(*a.cache))
            cache->load(*a.cache);
        factory = scripted_backends(suite.slip, cache, a.lm == "record" ? CacheMode::Record : CacheMode::Replay);
    }
    else
        throw ConfigError(fmt::format("unknown --lm '{}' (scripted, record, replay)", a.lm));

    SuiteOptions options;
    options.seeds = a.seeds.value_or(cfg.seeds.value_or(suite.seeds));
    options.parallelism = a.parallel.value_or(cfg.parallel.value_or(1));
    options.engine = suite.engine;
    if (cfg.k)
        options.engine.k = *cfg.k;
    if (cfg.max_iterations)
        options.engine.max_iterations = *cfg.max_iterations;
    if (cfg.max_depth)
        options.engine.max_depth = *cfg.max_depth;
    auto const out = a.out ? a.out : cfg.out;
    if (out)
        options.trace_dir = *out / "suite";

    auto const result = run_suite(specs, catalog, factory, options);
    auto const report = serialize_report(result.report, suite.name);
    auto const text = render_grid(result.report) + render_iterations(result.report.iterations);
    if (out)
    {
        write_file(*out / "report.json", report);
        write_file(*out / "report.txt", text);
    }
    if (cache && a.lm == "record")
        cache->export_file(*a.cache);
    fmt::print("{}", text);
    fmt::print("scenarios {} episodes {} digest {}\n", result.report.scenarios, result.report.episodes, report_digest(report));
    for (auto const& e: result.episodes)
        if (e.setup_error)
            fmt::print("setup error {} seed {}: {}\n", e.scenario_id, e.seed, *e.setup_error);
    std::size_t errors = 0;
    for (auto const& [mode, v]: result.report.aggregate)
        errors += v.errors;
    return errors == 0 ? ExitOk : ExitError;
}

// bootstrap --------------------------------------------------------------------------

struct BootstrapArgs
{
    std::filesystem::path world;
    int levels = 4;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> max_steps;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out_db = "skills.jsonl";
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> observations;
    std::size_t tasks = 0;
    std::optional<std::filesystem::path> tasks_out;
};

int cmd_bootstrap(BootstrapArgs const& a, CliConfig const& cfg)
{
    auto const world = load_world(a.world);
    std::shared_ptr<LmBackend> lm;
    if (cfg.lm && cfg.lm->kind == "remote")
        lm = std::make_shared<RemoteBackend>(cfg.lm->remote);
    else
    {
        auto s = std::make_shared<ScriptedBackend>("bootstrap");
        install_bootstrap_policies(*s, world);
        lm = s;
    }
    BootstrapConfig bc;
    bc.levels = a.levels;
    bc.budget = a.budget.value_or(cfg.bootstrap_budget.value_or(bc.budget));
    bc.max_steps = a.max_steps.value_or(cfg.bootstrap_max_steps.value_or(bc.max_steps));
    bc.seed = a.seed.value_or(cfg.bootstrap_seed.value_or(bc.seed));
    HashEmbedder embedder;
    BootstrapResult r;
    try
    {
        r = build_hierarchy(world, primitive_inventory(world), *lm, embedder, bc);
    }
    catch (BootstrapError const& e)
    {
        fmt::print("bootstrap failed: {}\n", e.what());
        for (auto const& l: e.levels())
            fmt::print("level {}: {} entries from {} episodes\n", l.level, l.entries, l.episodes);
        return ExitError;
    }
    save_database(r.db, a.out_db);
    if (a.manifest)
        write_file(*a.manifest, r.manifest);
    if (a.observations)
        save_observations(r.observations, *a.observations);
    for (auto const& l: r.levels)
        fmt::print("level {}: {} entries from {} episodes ({} failed, {} short, {} degenerate, {} duplicate)\n", l.level,
                   l.entries, l.episodes, l.failed, l.too_short, l.degenerate, l.duplicates);
    fmt::print("{}", render_stats(stats(r.db)));
    if (a.tasks > 0)
    {
        auto const tasks = author_tasks(r.db, world, a.tasks);
        auto const path = a.tasks_out.value_or(a.out_db.parent_path() / "tasks.json");
        write_file(path, serialize_tasks(tasks));
        fmt::print("{} task(s) written\n", tasks.size());
    }
    return validate(r.db).empty() ? ExitOk : ExitError;
}

// cache ------------------------------------------------------------------------------

int cmd_cache(std::string const& action, std::filesystem::path const& file, std::optional<std::filesystem::path> const& other)
{
    ReplayCache cache;
    if (action == "stats")
    {
        cache.load(file);
        std::map<std::string, std::size_t> byTag;
        std::set<std::string> backends;
        for (auto const& e: cache.entries())
        {
            ++byTag[e.tag];
            backends.insert(e.backend_id);
        }
        fmt::print("entries: {}\n", cache.size());
        for (auto const& [tag, n]: byTag)
            fmt::print("  {}: {}\n", tag, n);
        fmt::print("backends: {}\n", backends.size());
        return ExitOk;
    }
    if (action == "export")
    {
        cache.load(file);
        if (other)
            cache.export_file(*other);
        else
            fmt::print("{}", cache.export_text());
        return ExitOk;
    }
    // import: merge `other` into `file`
    if (!other)
        throw ConfigError("cache import needs --from");
    if (std::filesystem::exists(file))
        cache.load(file);
    auto const before = cache.size();
    cache.import_file(*other);
    cache.export_file(file);
    fmt::print("imported {} entr(ies), {} total\n", cache.size() - before, cache.size());
    return ExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "semgro: iterative skill grounding" };
    app.require_subcommand(1);
    std::optional<std::filesystem::path> configPath;
    app.add_option("--config", configPath, "JSON config file; paths inside resolve against it")->check(CLI::ExistingFile);

    auto* db = app.add_subcommand("db", "inspect a skill database");
    DbArgs da;
    db->add_option("action", da.action, "validate | stats | tasks")
        ->required()
        ->check(CLI::IsMember({ "validate", "stats", "tasks" }));
    db->add_option("file", da.file, "database (JSONL)")->required();
    db->add_option("--world", da.world, "tasks: world the tasks start from")->check(CLI::ExistingFile);
    db->add_option("--count", da.count, "tasks: how many, from the top level");
    db->add_option("--out", da.out, "tasks: output file (default: standard output)");

    auto* gr = app.add_subcommand("ground", "ground one instruction and stream the loop");
    GroundArgs ga;
    gr->add_option("--instruction", ga.instruction, "instruction text (default: the scenario's)");
    gr->add_option("--scenario", ga.scenario, "scenario file")->required()->check(CLI::ExistingFile);
    gr->add_option("--mode", ga.mode, "semgro | sg_l | sg_m | sg_h");
    gr->add_option("--k", ga.k, "retrieval size");
    gr->add_option("--max-iterations", ga.max_iterations, "loop iteration cap");
    gr->add_option("--trace", ga.trace, "trace output (JSONL)");
    gr->add_option("--record", ga.record, "record every completion into this cache file");

    auto* ev = app.add_subcommand("eval", "run a scenario suite");
    EvalArgs ea;
    ev->add_option("--suite", ea.suite, "suite file")->required()->check(CLI::ExistingFile);
    ev->add_option("--parallel", ea.parallel, "episodes in flight");
    ev->add_option("--seeds", ea.seeds, "replicas per scenario");
    ev->add_option("--out", ea.out, "output directory (report.json, report.txt, suite/)");
    ev->add_option("--lm", ea.lm, "scripted | record | replay");
    ev->add_option("--cache", ea.cache, "cache file for record/replay");

    auto* bs = app.add_subcommand("bootstrap", "build a skill hierarchy by chaining and summarizing");
    BootstrapArgs ba;
    bs->add_option("--world", ba.world, "world file")->required()->check(CLI::ExistingFile);
    bs->add_option("--levels", ba.levels, "M, the number of levels")->check(CLI::Range(2, 16));
    bs->add_option("--budget", ba.budget, "episodes per level");
    bs->add_option("--max-steps", ba.max_steps, "chain length cap");
    bs->add_option("--seed", ba.seed, "seed");
    bs->add_option("--out", ba.out_db, "database output (JSONL)");
    bs->add_option("--manifest", ba.manifest, "manifest output (JSON)");
    bs->add_option("--observations", ba.observations, "observation log output (JSONL)");
    bs->add_option("--tasks", ba.tasks, "author this many tasks from the top level");
    bs->add_option("--tasks-out", ba.tasks_out, "task file output (JSON)");

    auto* ca = app.add_subcommand("cache", "inspect or move replay caches");
    std::string cacheAction;
    std::filesystem::path cacheFile;
    std::optional<std::filesystem::path> cacheOther;
    ca->add_option("action", cacheAction, "export | import | stats")->required()->check(CLI::IsMember({ "export", "import", "stats" }));
    ca->add_option("file", cacheFile, "cache file (JSONL)")->required();
    ca->add_option("--out", cacheOther, "export target (default: standard output)");
    ca->add_option("--from", cacheOther, "import source");

    CLI11_PARSE(app, argc, argv);

    try
    {
        CliConfig cfg;
        if (configPath)
            cfg = load_config(*configPath);
        if (db->parsed())
            return cmd_db(da);
        if (gr->parsed())
            return cmd_ground(ga, cfg);
        if (ev->parsed())
            return cmd_eval(ea, cfg);
        if (bs->parsed())
            return cmd_bootstrap(ba, cfg);
        if (ca->parsed())
            return cmd_cache(cacheAction, cacheFile, cacheOther);
    }
    catch (std::exception const& e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return ExitError;
    }
    return ExitError;
}
