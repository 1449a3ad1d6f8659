// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/critic.hpp>
#include <semgro/engine.hpp>
#include <semgro/lm.hpp>
#include <semgro/retriever.hpp>
#include <semgro/skilldb.hpp>
#include <semgro/worldsim.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace semgro
{

// Fixtures -------------------------------------------------------------------------

/// A household with its skill database and task list, loaded once and shared by every episode.
struct SuiteWorld
{
    std::string id;
    WorldState world;
    SkillDatabase db;
    std::vector<TaskSpec> tasks;
    HashEmbedder embedder;
    std::unique_ptr<Retriever> retriever;

    SuiteWorld(std::string id, WorldState world, SkillDatabase db, std::vector<TaskSpec> tasks);
    SuiteWorld(SuiteWorld const&) = delete;
    SuiteWorld& operator=(SuiteWorld const&) = delete;

    [[nodiscard]] TaskSpec const& task(std::string_view name) const;
};

using WorldCatalog = std::map<std::string, std::shared_ptr<SuiteWorld const>>;

struct ShiftSetting
{
    ShiftKind kind = ShiftKind::None;
    ShiftDegree degree = ShiftDegree::None;
    bool operator==(ShiftSetting const&) const = default;
};

struct ScenarioSpec
{
    std::string id;
    std::string world; ///< key into the catalog
    ShiftSetting shift;
    std::uint64_t seed = 0; ///< base seed; replica j runs with replica_seed(seed, j)
    TaskSpec task;
    std::string instruction;
    InstructionType instruction_type = InstructionType::Structured;
    Mode mode = Mode::SemGro;
};

/// Throws ConfigError when the instruction is empty or the world/task is not in the catalog.
void check_scenario(ScenarioSpec const& spec, WorldCatalog const& catalog);

std::uint64_t scenario_seed(std::uint64_t suite_seed, std::string_view scenario_id);
std::uint64_t replica_seed(std::uint64_t scenario_seed, std::size_t replica);

/// Suite description: the cross product of worlds, tasks, shifts, instruction types and modes.
struct SuiteDefinition
{
    std::string name;
    std::uint64_t seed = 1;
    std::size_t seeds = 1; ///< replicas per scenario
    EngineConfig engine;
    double slip = 0.1;
    struct WorldFiles
    {
        std::string id;
        std::filesystem::path world;
        std::filesystem::path db;
        std::filesystem::path tasks;
        std::vector<std::string> task_names; ///< empty: every task
    };
    std::vector<WorldFiles> worlds;
    std::vector<ShiftSetting> shifts;
    std::vector<InstructionType> instruction_types;
    std::vector<Mode> modes;
};

/// JSON suite file. Relative paths resolve against `base_dir`. Unknown keys are rejected.
SuiteDefinition parse_suite(std::string_view text, std::filesystem::path const& base_dir);
SuiteDefinition load_suite(std::filesystem::path const& path);

WorldCatalog load_catalog(SuiteDefinition const& suite);
std::vector<ScenarioSpec> expand_scenarios(SuiteDefinition const& suite, WorldCatalog const& catalog);

// Ground truth ---------------------------------------------------------------------

/// The demonstration repaired for a (possibly shifted) world: each failing primitive is preceded by
/// the fix its failure reason names (walk, open, grab), or dropped when it is needless. Repair stops
/// at the first failure that names no fix.
std::vector<SkillPrimitive> repair_ground_truth(WorldState const& world, std::vector<SkillPrimitive> const& demo,
                                                std::size_t max_fixes = 32);

// Episodes -------------------------------------------------------------------------

struct EpisodeResult
{
    std::string scenario_id;
    std::uint64_t seed = 0;
    GroundingTrace trace;
    std::vector<std::string> ground_truth;
    double shift_fraction = 0.0;
    std::vector<std::string> perturbations;
    std::optional<std::string> setup_error; ///< the episode never started (e.g. calibration failed)
    std::string trace_hash;
};

/// Per-episode LM and critic. Built fresh for every episode so replicas never share state.
struct EpisodeBackends
{
    std::shared_ptr<LmBackend> lm;
    std::unique_ptr<Critic> critic; ///< unused by the fixed-level modes
};

using BackendFactory =
    std::function<EpisodeBackends(ScenarioSpec const& spec, SuiteWorld const& world, std::uint64_t seed)>;

/// Scripted planner (salted per seed) and the oracle critic. With a cache, the planner is wrapped:
/// Record stores every completion; Replay serves only from the cache and never calls the planner.
BackendFactory scripted_backends(double slip, std::shared_ptr<ReplayCache> cache = nullptr,
                                 CacheMode mode = CacheMode::Record);

/// Backend id used for the cache key of one episode's planner.
std::string planner_backend_id(std::string_view world, std::uint64_t seed);

EpisodeResult run_episode(ScenarioSpec const& spec, WorldCatalog const& catalog, std::uint64_t seed,
                          BackendFactory const& backends, EngineConfig const& engine);

// Metrics --------------------------------------------------------------------------

struct MetricValues
{
    std::size_t episodes = 0;
    std::size_t successes = 0;
    double sr = 0.0;   ///< percent
    double cgc = 0.0;  ///< percent
    double plan = 0.0; ///< percent, primitive-level prefix against the repaired ground truth
    double exec = 0.0; ///< percent of generation events that executed successfully
    std::size_t generated = 0;
    std::size_t executed_ok = 0;
    std::size_t executed = 0;
    double exec_of_executed = 0.0; ///< percent of executions that succeeded (critic-filtered view)
    double iterations_all = 0.0;    ///< mean NE count per episode
    double iterations_domain = 0.0; ///< mean domain-caused NE count per episode
    std::size_t errors = 0;
    bool operator==(MetricValues const&) const = default;
};

struct MetricsCell
{
    Mode mode = Mode::SemGro;
    InstructionType type = InstructionType::Structured;
    ShiftKind kind = ShiftKind::None;
    MetricValues values;
    bool operator==(MetricsCell const&) const = default;
};

struct IterationRow
{
    ShiftDegree degree = ShiftDegree::None;
    std::size_t episodes = 0;
    double all = 0.0;
    double domain = 0.0;
    bool operator==(IterationRow const&) const = default;
};

struct MetricsReport
{
    std::size_t scenarios = 0;
    std::size_t episodes = 0;
    std::vector<std::uint64_t> seeds; ///< distinct replica seeds, sorted
    std::vector<MetricsCell> cells;   ///< sorted by (mode, type, kind)
    std::map<Mode, MetricValues> aggregate;
    std::vector<IterationRow> iterations; ///< SemGro episodes only, one row per degree present
    bool operator==(MetricsReport const&) const = default;
};

/// Pure over its inputs and independent of their order. Throws Error when an episode names an
/// unknown scenario or its trace does not belong to it.
MetricsReport compute_metrics(std::vector<EpisodeResult> const& episodes, std::vector<ScenarioSpec> const& specs);

/// Mean iterations per degree; rows "Obs. & Dom." and "Dom." in the rendered form.
std::vector<IterationRow> iteration_stats(std::vector<EpisodeResult> const& episodes,
                                          std::map<std::string, ShiftDegree> const& degree_of);

std::string serialize_report(MetricsReport const& report, std::string_view suite_name);
std::string report_digest(std::string const& serialized);

/// Instruction types as rows, shift kinds as columns, "SR/CGC/Plan" per cell; one block per mode.
std::string render_grid(MetricsReport const& report);
std::string render_iterations(std::vector<IterationRow> const& rows);

// Suites ---------------------------------------------------------------------------

struct SuiteOptions
{
    std::size_t seeds = 1;
    std::size_t parallelism = 1;
    EngineConfig engine;
    std::optional<std::filesystem::path> trace_dir; ///< writes <dir>/<scenario-id>/<seed>/trace.jsonl
};

struct SuiteResult
{
    std::vector<EpisodeResult> episodes; ///< sorted by (scenario id, seed)
    MetricsReport report;
};

/// Runs every scenario `seeds` times. Episode failures are recorded, never thrown.
SuiteResult run_suite(std::vector<ScenarioSpec> const& specs, WorldCatalog const& catalog,
                      BackendFactory const& backends, SuiteOptions const& options);

// Task authoring -------------------------------------------------------------------

/// Goal conditions reached by running `plan` from `world`: placements of moved objects, changed
/// open/switch states, and where the agent sits.
std::vector<GoalCondition> derive_goals(WorldState const& world, std::vector<SkillPrimitive> const& plan);

/// The four instruction phrasings of a task built from a skill semantic.
std::map<InstructionType, std::string> phrase_instructions(std::string_view semantic, WorldState const& world);

/// Tasks built from the database's top-level entries, `count` at most, in id order.
std::vector<TaskSpec> author_tasks(SkillDatabase const& db, WorldState const& world, std::size_t count);

} // namespace semgro
