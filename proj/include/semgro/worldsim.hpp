// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/observation.hpp>
#include <semgro/skilldb.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace semgro
{

enum class Action
{
    Find,
    Grab,
    Walk,
    Sit,
    Put,
    Open,
    Close,
    SwitchOn,
    SwitchOff,
};

std::string_view to_string(Action action);
std::optional<Action> parse_action(std::string_view word);

/// One action of the primitive set, e.g. "put apple kitchencabinet".
struct SkillPrimitive
{
    Action action = Action::Walk;
    std::string object;
    std::optional<std::string> target; ///< put only

    [[nodiscard]] std::string str() const;
    bool operator==(SkillPrimitive const&) const = default;
};

/// Parses "<action> <object> [<target>]". Filler words ("to", "the", "in", "on", "into") are ignored.
std::optional<SkillPrimitive> parse_primitive(std::string_view text);

struct ObjectProps
{
    bool openable = false;
    bool switchable = false;
    bool graspable = false;
    bool surface = false;
    bool container = false;
    bool sittable = false;

    bool operator==(ObjectProps const&) const = default;
};

enum class Relation
{
    In,
    On,
};

struct WorldObject
{
    std::string name;  ///< identifier used by primitives
    std::string label; ///< perceived display name
    std::string cls;
    std::string room;  ///< empty while held
    std::optional<std::string> parent;
    Relation relation = Relation::On;
    ObjectProps props;
    std::optional<bool> open; ///< present iff openable
    std::optional<bool> on;   ///< present iff switchable
    std::vector<std::string> aliases; ///< alternative labels used by visual perturbations

    bool operator==(WorldObject const&) const = default;
};

struct AgentState
{
    std::string room;
    std::set<std::string> near;
    std::vector<std::string> holding;
    std::optional<std::string> sitting_on;

    bool operator==(AgentState const&) const = default;
};

inline constexpr std::size_t HandCapacity = 2;

/// Complete simulator state. A value type: copying it yields an independent world.
struct WorldState
{
    std::string world_id;
    std::vector<std::string> rooms;
    std::set<std::pair<std::string, std::string>> doors; ///< unordered pairs stored with first < second
    std::map<std::string, WorldObject> objects;
    AgentState agent;
    std::uint64_t step_count = 0;
    std::uint64_t rng_seed = 0;

    [[nodiscard]] WorldObject const* find(std::string_view name) const;
    [[nodiscard]] WorldObject const& at(std::string_view name) const;
    [[nodiscard]] bool adjacent(std::string const& a, std::string const& b) const;
    [[nodiscard]] bool holding(std::string const& name) const;
    /// True when some ancestor is a closed container holding the object.
    [[nodiscard]] std::optional<std::string> hidden_by(std::string const& name) const;
    [[nodiscard]] bool visible(std::string const& name) const;
    [[nodiscard]] std::vector<std::string> ancestors(std::string const& name) const;
    [[nodiscard]] std::vector<std::string> children(std::string const& name) const;
    /// Object whose label (or name) matches, normalized.
    [[nodiscard]] WorldObject const* find_by_label(std::string_view label) const;

    bool operator==(WorldState const&) const = default;
};

/// Checks structural invariants; returns a list of problems (empty when valid).
std::vector<std::string> check_world(WorldState const& state);

WorldState parse_world(std::string_view text);
WorldState load_world(std::filesystem::path const& path);
std::string serialize_world(WorldState const& state);

/// Canonical digest of the whole state, including agent and step counter.
std::string state_hash(WorldState const& state);

Observation observe(WorldState const& state);
std::string format_state(std::string const& label, std::string const& state);
/// "a is OPEN, b is CLOSED" in name order.
std::string render_states(Observation const& obs);

struct StepOutcome
{
    bool success = false;
    std::string failure_reason;
};

/// Applies a primitive in place. Failed primitives leave the state untouched.
StepOutcome apply(WorldState& state, SkillPrimitive const& primitive);

struct StepResult
{
    WorldState state;
    Observation observation;
    bool success = false;
    std::optional<std::string> failure_reason;
};

/// Value-semantic wrapper around apply.
StepResult step(WorldState const& state, SkillPrimitive const& primitive);

/// Expands a semantic to primitives: a database entry is expanded recursively; otherwise the text
/// must parse as a primitive. Throws Error("unknown skill ...") on neither.
std::vector<SkillPrimitive> resolve_primitives(SkillDatabase const& db, std::string_view semantic);

struct CompositeResult
{
    std::vector<SkillPrimitive> executed;
    bool success = false;
    std::optional<SkillPrimitive> failed_primitive;
    std::string failure_reason;
};

/// Runs primitives in order and stops at the first failure; partial effects persist.
CompositeResult run_primitives(WorldState& state, std::vector<SkillPrimitive> const& primitives);
CompositeResult execute_composite(WorldState& state, SkillDatabase const& db, std::string_view semantic);

/// Runs on a copy; the argument is never modified.
CompositeResult dry_run(WorldState const& state, std::vector<SkillPrimitive> const& primitives);

// Goals and tasks --------------------------------------------------------------

enum class GoalKind
{
    In,
    On,
    State,
    Sitting,
    Holding,
};

/// in(a,b), on(a,b), state(a,OPEN|CLOSED|ON|OFF), sitting(a), holding(a)
struct GoalCondition
{
    GoalKind kind = GoalKind::In;
    std::string a;
    std::string b;

    [[nodiscard]] std::string str() const;
    bool operator==(GoalCondition const&) const = default;
};

GoalCondition parse_goal(std::string_view text);
bool holds(WorldState const& state, GoalCondition const& goal);

enum class InstructionType
{
    AbstractNoun,
    AbstractVerb,
    Structured,
    LongHorizon,
};

std::string_view to_string(InstructionType type);
InstructionType parse_instruction_type(std::string_view text);

struct TaskSpec
{
    std::string name;
    std::vector<GoalCondition> goals;
    std::vector<SkillPrimitive> ground_truth;
    std::size_t step_budget = 60;
    std::map<InstructionType, std::string> instructions;
};

std::vector<TaskSpec> parse_tasks(std::string_view text);
std::vector<TaskSpec> load_tasks(std::filesystem::path const& path);
std::string serialize_tasks(std::vector<TaskSpec> const& tasks);

std::size_t goals_met(WorldState const& state, std::vector<GoalCondition> const& goals);

// Domain shifts ----------------------------------------------------------------

enum class ShiftKind
{
    None,
    OL,
    PA,
    RS,
};

enum class ShiftDegree
{
    None,
    Small,
    Medium,
    Large,
};

std::string_view to_string(ShiftKind kind);
std::string_view to_string(ShiftDegree degree);
ShiftKind parse_shift_kind(std::string_view text);
ShiftDegree parse_shift_degree(std::string_view text);

/// Inclusive-exclusive window a calibrated shift must land in, expressed as failing fractions.
struct CalibrationBand
{
    double lo = 0.0; ///< exclusive lower bound for acceptance
    double target = 0.0; ///< calibration stops once this is reached
    double hi = 0.0; ///< inclusive upper bound
};

CalibrationBand calibration_band(ShiftDegree degree);

struct ShiftResult
{
    WorldState state;
    double fraction = 0.0;
    std::vector<std::string> perturbations;
};

/// Raised when no admissible sequence of perturbations lands in the requested band.
class CalibrationError: public Error
{
  public:
    CalibrationError(std::string const& what, double achieved): Error(what), _achieved(achieved) {}
    [[nodiscard]] double achieved() const noexcept { return _achieved; }

  private:
    double _achieved;
};

/// Applies seeded perturbations of the given kind until the share of top-level database entries whose
/// recorded plans fail lands in the degree's band. `focus` objects are perturbed first when possible.
ShiftResult apply_shift(WorldState const& base, ShiftKind kind, ShiftDegree degree, std::uint64_t seed,
                        SkillDatabase const& db, std::vector<std::string> const& focus = {});

struct ShiftQuantity
{
    ShiftDegree degree = ShiftDegree::None;
    double fraction = 0.0;
    std::size_t failing = 0;
    std::size_t total = 0;
};

ShiftDegree degree_for_fraction(double fraction);

/// Share of top-level entries whose recorded plan fails from `shifted`. The base is checked for sanity:
/// entries already failing there are excluded from the count.
ShiftQuantity quantify_shift(WorldState const& base, WorldState const& shifted, SkillDatabase const& db);

} // namespace semgro
