// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/lm.hpp>
#include <semgro/worldsim.hpp>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace semgro
{

/// dn(o_t) and ds(o_t): detected object names and their state words.
struct Perception
{
    std::set<std::string> object_names;
    std::map<std::string, std::string> object_states;

    bool operator==(Perception const&) const = default;
};

/// Throws Error when a state key is not among the names or a state word is unknown.
void check_perception(Perception const& p);

/// "a is OPEN, b is CLOSED" in name order.
std::string render_perception_states(Perception const& p);

class PerceptionBackend
{
  public:
    virtual ~PerceptionBackend() = default;
    virtual Perception perceive(Observation const& obs) = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

/// Simulator ground truth, passed through verbatim.
class OraclePerception final: public PerceptionBackend
{
  public:
    Perception perceive(Observation const& obs) override;
    [[nodiscard]] std::string id() const override { return "oracle"; }
};

struct HttpPerceptionConfig
{
    std::string base_url;
    std::string path = "/perceive";
    int timeout_seconds = 30;
};

/// POSTs {"snapshot_id", "room"} and expects {"object_names": [...], "object_states": {...}}.
/// Replies that break the Perception invariants are reported, never repaired.
class HttpPerception final: public PerceptionBackend
{
  public:
    explicit HttpPerception(HttpPerceptionConfig config);
    Perception perceive(Observation const& obs) override;
    [[nodiscard]] std::string id() const override { return "http:" + _config.base_url + _config.path; }

  private:
    HttpPerceptionConfig _config;
};

enum class Verdict
{
    E,
    NE,
};

enum class Cause
{
    None, ///< E verdicts carry no cause
    Observational,
    Domain,
    Unknown,
};

std::string_view to_string(Verdict v);
std::string_view to_string(Cause c);
Cause parse_cause(std::string_view text);

struct CriticVerdict
{
    Verdict tag = Verdict::E;
    std::string feedback; ///< non-empty iff NE
    Cause cause = Cause::None;

    [[nodiscard]] bool executable() const noexcept { return tag == Verdict::E; }
    static CriticVerdict executable_verdict() { return {}; }
    static CriticVerdict blocked(std::string feedback, Cause cause = Cause::Unknown);
};

std::string build_critic_prompt(std::string_view skill, Perception const& perception,
                                std::vector<std::string> const& lower_skills = {});

struct CriticQuery
{
    std::string skill;
    std::vector<std::string> objects;
    std::vector<std::string> states; ///< "x is OPEN" items
    std::vector<std::string> lower_skills;
};
CriticQuery parse_critic_prompt(std::string_view prompt);

/// Two-line grammar: "Executable: yes|no" then "Feedback: <text>". A yes may carry "none" or nothing.
std::optional<CriticVerdict> parse_verdict(std::string_view text);

class UnparseableVerdictError: public LmError
{
  public:
    using LmError::LmError;
};

/// ψ_LM: one call, one retry with a format reminder, then UnparseableVerdictError.
CriticVerdict judge(LmBackend& lm, std::string_view skill, Perception const& perception,
                    std::vector<std::string> const& lower_skills = {});

/// Ground-truth stand-in: dry-runs the skill expansion on a copy of `state`.
CriticVerdict oracle_judge(WorldState const& state, SkillDatabase const& db, std::string_view skill);

/// NE cause: `domain` when the recorded plan succeeds from the training reset but fails from the
/// target reset, otherwise `observational`.
Cause classify_cause(WorldState const& training_reset, WorldState const& target_reset, SkillDatabase const& db,
                     std::string_view skill);

// Critic stacks used by the engine -----------------------------------------------

struct CriticContext
{
    WorldState const& live;
    Observation const& observation;
    std::vector<std::string> const& lower_skills;
};

struct CriticReport
{
    CriticVerdict verdict;
    std::optional<Perception> perception; ///< absent for the oracle stack
    bool dry_run_pure = true; ///< the live state hash was unchanged by the assessment
};

class Critic
{
  public:
    virtual ~Critic() = default;
    virtual CriticReport assess(CriticContext const& ctx, std::string_view skill) = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

/// ψ = ψ_LM ∘ ψ_VLM.
class LmCritic final: public Critic
{
  public:
    LmCritic(std::shared_ptr<LmBackend> lm, std::shared_ptr<PerceptionBackend> perception, bool show_lower_skills = true);
    CriticReport assess(CriticContext const& ctx, std::string_view skill) override;
    [[nodiscard]] std::string id() const override;

  private:
    std::shared_ptr<LmBackend> _lm;
    std::shared_ptr<PerceptionBackend> _perception;
    bool _showLower;
};

class OracleCritic final: public Critic
{
  public:
    explicit OracleCritic(SkillDatabase const& db): _db(db) {}
    CriticReport assess(CriticContext const& ctx, std::string_view skill) override;
    [[nodiscard]] std::string id() const override { return "oracle"; }

  private:
    SkillDatabase const& _db;
};

} // namespace semgro
