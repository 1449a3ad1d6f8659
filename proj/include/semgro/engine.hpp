// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/critic.hpp>
#include <semgro/planner.hpp>
#include <semgro/retriever.hpp>
#include <semgro/worldsim.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace semgro
{

enum class Mode
{
    SemGro,
    SgL, ///< lowest level only, critic bypassed
    SgM, ///< strictly between lowest and highest, critic bypassed
    SgH, ///< highest level only, critic bypassed
};

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct EngineConfig
{
    std::size_t k = DefaultK;
    std::size_t max_iterations = 40; ///< generator calls per episode
    std::size_t max_depth = 4;       ///< deepest refinement frame
    Mode mode = Mode::SemGro;
    bool no_progress_abort = true;
};

void check_config(EngineConfig const& config);

/// Retrieval level range for a mode; throws ConfigError when the middle tier is empty.
std::optional<LevelRange> level_filter(Mode mode, int max_level);

/// The live episode: the world the agent acts in plus what the loop needs to judge progress.
struct Environment
{
    WorldState live;
    WorldState target_reset;                  ///< state at reset, for the cause classifier
    std::optional<WorldState> training_reset; ///< canonical training world; absent means causes are unknown
    std::vector<GoalCondition> goals;
    std::size_t step_budget = 60; ///< primitive steps

    [[nodiscard]] bool done() const { return !goals.empty() && goals_met(live, goals) == goals.size(); }
};

/// Everything the planner needs: the LM, the retriever over D and the embedder for output matching.
struct PlannerStack
{
    LmBackend& lm;
    Retriever const& retriever;
    Embedder const& embedder;
};

enum class FrameKind
{
    Root,
    Refinement,
};

struct InstructionFrame
{
    std::string instruction;
    ExecutionHistory history;
    FrameKind kind = FrameKind::Root;
    std::size_t depth = 0;
};

enum class Outcome
{
    Done,
    BudgetExhausted,
    Error,
};

std::string_view to_string(Outcome outcome);
Outcome parse_outcome(std::string_view text);

struct IterationCounters
{
    std::size_t all = 0; ///< NE verdicts, each one a decomposition iteration
    std::size_t domain = 0;
    std::size_t observational = 0;
    std::size_t unknown = 0;

    bool operator==(IterationCounters const&) const = default;
};

struct VerdictRecord
{
    Verdict tag = Verdict::E;
    std::string feedback;
    Cause cause = Cause::None;
    bool operator==(VerdictRecord const&) const = default;
};

struct TraceStep
{
    std::size_t index = 0;
    std::string instruction;
    FrameKind kind = FrameKind::Root;
    std::size_t depth = 0;
    std::vector<std::string> history; ///< frame history before this step
    std::string room;
    std::vector<std::string> visible;
    std::vector<std::string> retrieved; ///< "(m,n) semantic"
    std::vector<std::string> candidates;
    std::vector<std::string> lower_candidates;
    std::string template_id;
    std::string generated; ///< empty when the planner answered done
    std::string match;
    int attempts = 1;
    std::optional<VerdictRecord> verdict;
    std::optional<std::string> refinement;
    bool executed = false; ///< execution attempted
    bool execution_success = false;
    std::vector<std::string> primitives; ///< primitives that actually ran
    std::vector<std::string> planned;    ///< the full expansion of the generated skill
    std::string failure_reason;
    std::string event; ///< execute | refine | done | pop | abort
    std::size_t stack_after = 0;
    std::string hash_before;
    std::string hash_after;
    bool dry_run_pure = true;
    IterationCounters counters; ///< running totals after this step

    bool operator==(TraceStep const&) const = default;
};

inline constexpr std::string_view TraceSchema = "semgro.trace/1";

struct GroundingTrace
{
    std::string schema = std::string(TraceSchema);
    std::string instruction;
    Mode mode = Mode::SemGro;
    std::size_t k = DefaultK;
    std::size_t max_iterations = 0;
    std::size_t max_depth = 0;
    std::string critic_id;
    std::string lm_id;
    std::string generator_template;
    std::string retriever_template;
    std::vector<TraceStep> steps;
    Outcome outcome = Outcome::Error;
    std::string stop_reason;
    std::size_t goals_met = 0;
    std::size_t goals_total = 0;
    std::size_t primitive_steps = 0;
    IterationCounters counters;
    std::string final_hash;

    bool operator==(GroundingTrace const&) const = default;
};

using StepCallback = std::function<void(TraceStep const&)>;

/// Iterative skill grounding. Planner and critic errors end the episode with outcome=error and the
/// partial trace kept. `critic` is required in SemGro mode and ignored otherwise.
GroundingTrace ground(std::string_view instruction, Environment& env, SkillDatabase const& db, PlannerStack planner,
                      Critic* critic, EngineConfig const& config, StepCallback const& on_step = {});

/// Fixed-level planning with the critic bypassed. Rejects SemGro mode.
GroundingTrace run_ablation(std::string_view instruction, Environment& env, SkillDatabase const& db,
                            PlannerStack planner, EngineConfig const& config, StepCallback const& on_step = {});

/// Line-delimited trace: a header line, one line per step, a footer line.
std::string serialize_trace(GroundingTrace const& trace);
GroundingTrace parse_trace(std::string_view text);
std::string trace_hash(GroundingTrace const& trace);

/// Execute-only-after-E, refinement-or-abort after NE, stack discipline, depth bound, dry-run purity
/// and hash continuity. Returns human-readable violations.
std::vector<std::string> check_trace(GroundingTrace const& trace);

/// Expansion of every skill the episode committed to, in order: E skills in SemGro mode, every
/// generated skill in the ablation modes.
std::vector<std::string> planned_sequence(GroundingTrace const& trace);

} // namespace semgro
