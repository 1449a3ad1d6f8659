// SPDX-License-Identifier: Apache-2.0
#include <semgro/policies.hpp>
#include <semgro/scenario.hpp>

#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace semgro
{

using json = nlohmann::json;

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

    json parse_json(std::string_view text, std::string_view what)
    {
        try
        {
            return json::parse(text);
        }
        catch (json::parse_error const& e)
        {
            throw ParseError(fmt::format("{} is not valid JSON: {}", what, e.what()), 0);
        }
    }

    LmSettings lm_from(json const& j, std::filesystem::path const& base_dir)
    {
        reject_unknown(j, { "kind", "rules", "cache", "backend_id", "slip", "base_url", "path", "model", "token_env",
                            "timeout_seconds", "max_retries" },
                       "lm");
        LmSettings s;
        s.kind = j.value("kind", s.kind);
        if (j.contains("rules"))
            s.rules = base_dir / j.at("rules").get<std::string>();
        if (j.contains("cache"))
            s.cache = base_dir / j.at("cache").get<std::string>();
        s.backend_id = j.value("backend_id", s.backend_id);
        s.slip = j.value("slip", s.slip);
        s.remote.base_url = j.value("base_url", s.remote.base_url);
        s.remote.path = j.value("path", s.remote.path);
        s.remote.model = j.value("model", s.remote.model);
        s.remote.token_env = j.value("token_env", s.remote.token_env);
        s.remote.timeout_seconds = j.value("timeout_seconds", s.remote.timeout_seconds);
        s.remote.max_retries = j.value("max_retries", s.remote.max_retries);
        if (s.kind == "rules" && s.rules.empty())
            throw ConfigError("lm kind 'rules' needs a rules file");
        if (s.kind == "replay" && (s.cache.empty() || s.backend_id.empty()))
            throw ConfigError("lm kind 'replay' needs a cache file and the backend id it was recorded under");
        if (s.kind == "remote" && (s.remote.base_url.empty() || s.remote.model.empty()))
            throw ConfigError("lm kind 'remote' needs base_url and model");
        if (!std::set<std::string> { "scripted", "rules", "replay", "remote" }.contains(s.kind))
            throw ConfigError(fmt::format("unknown lm kind '{}'", s.kind));
        return s;
    }

    CriticSettings critic_from(json const& j)
    {
        reject_unknown(j, { "kind", "perception", "perception_url" }, "critic");
        CriticSettings s;
        s.kind = j.value("kind", s.kind);
        s.perception = j.value("perception", s.perception);
        s.perception_url = j.value("perception_url", s.perception_url);
        if (s.kind != "lm" && s.kind != "oracle")
            throw ConfigError(fmt::format("unknown critic kind '{}'", s.kind));
        if (s.perception != "oracle" && s.perception != "http")
            throw ConfigError(fmt::format("unknown perception '{}'", s.perception));
        if (s.perception == "http" && s.perception_url.empty())
            throw ConfigError("http perception needs perception_url");
        return s;
    }
} // namespace

LmSettings parse_lm_settings(std::string_view json_text, std::filesystem::path const& base_dir)
{
    try
    {
        return lm_from(parse_json(json_text, "lm settings"), base_dir);
    }
    catch (json::exception const& e)
    {
        throw ConfigError(fmt::format("malformed lm settings: {}", e.what()));
    }
}

CriticSettings parse_critic_settings(std::string_view json_text)
{
    try
    {
        return critic_from(parse_json(json_text, "critic settings"));
    }
    catch (json::exception const& e)
    {
        throw ConfigError(fmt::format("malformed critic settings: {}", e.what()));
    }
}

ScenarioFile parse_scenario_file(std::string_view text, std::filesystem::path const& base_dir)
{
    auto const j = parse_json(text, "scenario");
    reject_unknown(j, { "world", "db", "tasks", "task", "instruction_type", "instruction", "goals", "step_budget",
                        "shift", "engine", "lm", "critic" },
                   "scenario");
    ScenarioFile s;
    try
    {
        s.training = load_world(base_dir / j.at("world").get<std::string>());
        s.db = load_database(base_dir / j.at("db").get<std::string>());
        if (j.contains("tasks"))
            s.tasks = load_tasks(base_dir / j.at("tasks").get<std::string>());
        if (j.contains("task"))
        {
            auto const name = normalize_text(j.at("task").get<std::string>());
            for (auto const& t: s.tasks)
                if (normalize_text(t.name) == name)
                    s.task = t;
            if (!s.task)
                throw ConfigError(fmt::format("scenario names unknown task '{}'", name));
            s.goals = s.task->goals;
            s.step_budget = s.task->step_budget;
            auto const type = parse_instruction_type(j.value("instruction_type", std::string("Structured")));
            if (auto it = s.task->instructions.find(type); it != s.task->instructions.end())
                s.instruction = it->second;
        }
        s.instruction = j.value("instruction", s.instruction);
        if (j.contains("goals"))
        {
            s.goals.clear();
            for (auto const& g: j.at("goals"))
                s.goals.push_back(parse_goal(g.get<std::string>()));
        }
        s.step_budget = j.value("step_budget", s.step_budget);
        if (j.contains("engine"))
        {
            auto const& e = j.at("engine");
            reject_unknown(e, { "k", "max_iterations", "max_depth", "no_progress_abort", "mode" }, "engine");
            s.engine.k = e.value("k", s.engine.k);
            s.engine.max_iterations = e.value("max_iterations", s.engine.max_iterations);
            s.engine.max_depth = e.value("max_depth", s.engine.max_depth);
            s.engine.no_progress_abort = e.value("no_progress_abort", s.engine.no_progress_abort);
            if (e.contains("mode"))
                s.engine.mode = parse_mode(e.at("mode").get<std::string>());
        }
        s.target = s.training;
        if (j.contains("shift"))
        {
            auto const& sh = j.at("shift");
            reject_unknown(sh, { "kind", "degree", "seed" }, "shift");
            std::vector<std::string> focus;
            if (s.task)
                for (auto const& p: s.task->ground_truth)
                    focus.push_back(p.object);
            auto r = apply_shift(s.training, parse_shift_kind(sh.at("kind").get<std::string>()),
                                 parse_shift_degree(sh.at("degree").get<std::string>()),
                                 sh.value("seed", std::uint64_t { 1 }), s.db, focus);
            s.target = std::move(r.state);
            s.perturbations = std::move(r.perturbations);
        }
        if (j.contains("lm"))
            s.lm = lm_from(j.at("lm"), base_dir);
        if (j.contains("critic"))
            s.critic = critic_from(j.at("critic"));
    }
    catch (json::exception const& e)
    {
        throw ConfigError(fmt::format("malformed scenario: {}", e.what()));
    }
    check_config(s.engine);
    return s;
}

ScenarioFile load_scenario_file(std::filesystem::path const& path)
{
    return parse_scenario_file(read_file(path), path.parent_path());
}

GroundStack build_ground_stack(ScenarioFile const& scenario, bool record)
{
    GroundStack g;
    auto const& s = scenario.lm;
    std::shared_ptr<LmBackend> inner;
    if (s.kind == "scripted")
    {
        auto lm = std::make_shared<ScriptedBackend>("policy");
        install(*lm, std::make_shared<ScriptedPlanner>(scenario.db, PolicyKnowledge::from(scenario.tasks, scenario.training),
                                                       s.slip));
        inner = std::move(lm);
    }
    else if (s.kind == "rules")
        inner = std::make_shared<ScriptedBackend>(s.rules.stem().string(), load_rules(s.rules));
    else if (s.kind == "remote")
        inner = std::make_shared<RemoteBackend>(s.remote);

    if (s.kind == "replay")
    {
        g.cache = std::make_shared<ReplayCache>();
        g.cache->load(s.cache);
        g.lm = std::make_shared<CachedBackend>(nullptr, g.cache, CacheMode::Replay, s.backend_id);
    }
    else if (record)
    {
        g.cache = std::make_shared<ReplayCache>();
        g.lm = std::make_shared<CachedBackend>(inner, g.cache, CacheMode::Record, inner->id());
    }
    else
        g.lm = inner;

    if (scenario.critic.kind == "oracle")
        g.critic = std::make_unique<OracleCritic>(scenario.db);
    else
    {
        std::shared_ptr<PerceptionBackend> perception;
        if (scenario.critic.perception == "http")
            perception = std::make_shared<HttpPerception>(HttpPerceptionConfig { scenario.critic.perception_url });
        else
            perception = std::make_shared<OraclePerception>();
        g.critic = std::make_unique<LmCritic>(g.lm, perception);
    }
    return g;
}

} // namespace semgro
