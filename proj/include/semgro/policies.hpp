// SPDX-License-Identifier: Apache-2.0
#pragma once
// Deterministic stand-ins for the LM policies. They read only the prompt text plus static
// training-time knowledge, so they can sit behind the same backend interface as a real model.

#include <semgro/lm.hpp>
#include <semgro/skilldb.hpp>
#include <semgro/worldsim.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace semgro
{

/// Training-time knowledge: instructions with their demonstrated primitive sequence, and the
/// label vocabulary of the household (label or alias -> object name).
struct PolicyKnowledge
{
    std::map<std::string, std::vector<SkillPrimitive>> tasks; ///< keyed by normalized instruction
    std::map<std::string, std::string> labels;

    static PolicyKnowledge from(std::vector<TaskSpec> const& tasks, WorldState const& world);
    [[nodiscard]] std::optional<std::string> object_for(std::string_view label) const;
};

/// A primitive of a target sequence. Pinned support steps must be executed; the others are
/// conveniences a skill may skip.
struct TargetStep
{
    SkillPrimitive primitive;
    bool pinned = false;
};

bool is_support(Action action) noexcept;

/// Refined instructions produced by the scripted φ_R, in two shapes:
///   "first <act> the <label>, then <skill>"   (act: open, switch on, walk to, grab)
///   "<skill>, but do not <act> the <label>"
struct RefinementGrammar
{
    std::string skill;
    std::string prefix; ///< feasible leading segments to do before the fix, may be empty
    std::string act;
    std::string label;
    bool negative = false;
};

std::optional<RefinementGrammar> parse_refinement_text(std::string_view text);

/// For a sequence skill ("a and then b and then c"), the part the feedback is about: the first
/// segment sharing a word with the feedback's cause clause, else the first segment.
std::string blocked_segment(std::string_view skill, std::string_view feedback);

/// The same split with the segments ahead of the blocked one joined back ("" when it is the first).
std::pair<std::string, std::string> split_blocked(std::string_view skill, std::string_view feedback);

/// Scripted φ_R: maps (blocked segment, feedback) onto the grammar above, or a generic fallback.
std::string scripted_refinement(std::string_view skill, std::string_view feedback);

/// Patches the expansion of `skill` with the fix named by a refined instruction.
std::vector<TargetStep> patch_target(std::vector<SkillPrimitive> const& base, RefinementGrammar const& fix,
                                     PolicyKnowledge const& knowledge);

/// Remaining target after greedy matching of the executed history (manipulation steps) and
/// dropping support steps already taken since the last match.
std::vector<TargetStep> remaining_target(std::vector<TargetStep> const& target,
                                         std::vector<SkillPrimitive> const& history);

struct RankedCandidate
{
    std::string semantic;
    std::size_t covered = 0; ///< manipulation steps of the remaining target it completes
    std::size_t extra = 0;   ///< support steps outside the target
    std::size_t skipped = 0; ///< unpinned support steps of the target it passes over
    int level = 1;
    bool fits = false;
};

/// Best first.
std::vector<RankedCandidate> rank_candidates(std::vector<std::string> const& candidates,
                                             std::vector<TargetStep> const& remaining, SkillDatabase const& db);

inline constexpr double DefaultSlip = 0.1;

/// Scripted generator and task retriever. The generator picks the candidate that advances
/// the frame's target furthest and, with probability `slip` keyed on the prompt, the runner-up.
class ScriptedPlanner
{
  public:
    /// `salt` varies the slip draws between otherwise identical runs (one salt per seed).
    ScriptedPlanner(SkillDatabase const& db, PolicyKnowledge knowledge, double slip = DefaultSlip, std::string salt = {});

    [[nodiscard]] std::string generate(std::string_view prompt) const;
    [[nodiscard]] std::string refine(std::string_view prompt) const;

    /// Target primitive sequence the planner pursues under `instruction`.
    [[nodiscard]] std::optional<std::vector<TargetStep>> target_for(std::string_view instruction) const;

    [[nodiscard]] double slip() const noexcept { return _slip; }

  private:
    SkillDatabase const& _db;
    PolicyKnowledge _knowledge;
    double _slip;
    std::string _salt;
};

/// Registers generator and retriever handlers on `lm`. The planner is kept alive by the handlers.
void install(ScriptedBackend& lm, std::shared_ptr<ScriptedPlanner const> planner);

} // namespace semgro
