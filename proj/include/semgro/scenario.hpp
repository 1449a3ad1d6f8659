// SPDX-License-Identifier: Apache-2.0
#pragma once
// Single-episode scenario files: fixtures plus backend selection, as used by `semgro ground`.

#include <semgro/critic.hpp>
#include <semgro/engine.hpp>
#include <semgro/lm.hpp>
#include <semgro/skilldb.hpp>
#include <semgro/worldsim.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace semgro
{

struct LmSettings
{
    std::string kind = "scripted"; ///< scripted | rules | replay | remote
    std::filesystem::path rules;   ///< rules
    std::filesystem::path cache;   ///< replay
    std::string backend_id;        ///< replay: id the cache was recorded under
    double slip = 0.0;             ///< scripted
    RemoteConfig remote;           ///< remote; the token comes from the environment variable it names
};

struct CriticSettings
{
    std::string kind = "lm";          ///< lm | oracle
    std::string perception = "oracle"; ///< oracle | http
    std::string perception_url;
};

/// JSON objects of the shapes above. Unknown keys are rejected; paths resolve against `base_dir`.
LmSettings parse_lm_settings(std::string_view json_text, std::filesystem::path const& base_dir);
CriticSettings parse_critic_settings(std::string_view json_text);

struct ScenarioFile
{
    WorldState training; ///< the world the skills were acquired in
    WorldState target;   ///< where the episode runs (training with the shift applied)
    SkillDatabase db;
    std::vector<TaskSpec> tasks;
    std::optional<TaskSpec> task;
    std::string instruction; ///< from the task's instruction_type phrasing, may be empty
    std::vector<GoalCondition> goals;
    std::size_t step_budget = 60;
    EngineConfig engine;
    LmSettings lm;
    CriticSettings critic;
    std::vector<std::string> perturbations;
};

ScenarioFile parse_scenario_file(std::string_view text, std::filesystem::path const& base_dir);
ScenarioFile load_scenario_file(std::filesystem::path const& path);

struct GroundStack
{
    std::shared_ptr<LmBackend> lm;
    std::unique_ptr<Critic> critic;
    std::shared_ptr<ReplayCache> cache; ///< set when recording or replaying
};

/// Builds the backends a scenario names. With `record`, every completion is stored in a cache
/// the caller exports afterwards.
GroundStack build_ground_stack(ScenarioFile const& scenario, bool record = false);

} // namespace semgro
