// SPDX-License-Identifier: Apache-2.0
#include <semgro/critic.hpp>
#include <semgro/planner.hpp>

#include <regex>

#include <fmt/format.h>

namespace semgro
{

namespace
{
    bool known_state_word(std::string const& s)
    {
        return s == "OPEN" || s == "CLOSED" || s == "ON" || s == "OFF";
    }
} // namespace

void check_perception(Perception const& p)
{
    for (auto const& [name, state]: p.object_states)
    {
        if (!p.object_names.contains(name))
            throw Error(fmt::format("perception reports a state for '{}' which is not among the detected objects", name));
        if (!known_state_word(state))
            throw Error(fmt::format("perception reports unknown state '{}' for '{}'", state, name));
    }
    for (auto const& n: p.object_names)
        if (trim(n).empty())
            throw Error("perception reports an empty object name");
}

std::string render_perception_states(Perception const& p)
{
    std::vector<std::string> parts;
    for (auto const& [name, state]: p.object_states)
        parts.push_back(format_state(name, state));
    return join(parts, ", ");
}

Perception OraclePerception::perceive(Observation const& obs)
{
    Perception p { obs.object_names, obs.object_states };
    check_perception(p);
    return p;
}

std::string_view to_string(Verdict v)
{
    return v == Verdict::E ? "E" : "NE";
}

std::string_view to_string(Cause c)
{
    switch (c)
    {
    case Cause::None:
        return "none";
    case Cause::Observational:
        return "observational";
    case Cause::Domain:
        return "domain";
    case Cause::Unknown:
        return "unknown";
    }
    return "?";
}

Cause parse_cause(std::string_view text)
{
    for (auto c: { Cause::None, Cause::Observational, Cause::Domain, Cause::Unknown })
        if (to_string(c) == text)
            return c;
    throw ParseError(fmt::format("unknown cause '{}'", text));
}

CriticVerdict CriticVerdict::blocked(std::string feedback, Cause cause)
{
    if (trim(feedback).empty())
        throw Error("a non-executable verdict needs feedback");
    return { Verdict::NE, std::move(feedback), cause };
}

// Prompt -----------------------------------------------------------------------

std::string build_critic_prompt(std::string_view skill, Perception const& perception,
                                std::vector<std::string> const& lower_skills)
{
    if (trim(skill).empty())
        throw Error("cannot judge an empty skill");
    std::vector<std::string> names(perception.object_names.begin(), perception.object_names.end());
    auto const states = render_perception_states(perception);
    return fill_template(prompt_template("critic").text,
                         {
                             { "objects", names.empty() ? std::string("none") : join(names, ", ") },
                             { "states", states.empty() ? std::string("none") : states },
                             { "lower", lower_skills.empty() ? std::string()
                                                             : fmt::format("low level skills: {}\n", join(lower_skills, ", ")) },
                             { "skill", std::string(trim(skill)) },
                         });
}

CriticQuery parse_critic_prompt(std::string_view prompt)
{
    CriticQuery q;
    auto list = [](std::string const& value) {
        std::vector<std::string> out;
        if (value == "none")
            return out;
        for (auto const& item: split(value, ','))
            if (auto t = trim(item); !t.empty())
                out.push_back(std::move(t));
        return out;
    };
    bool sawSkill = false;
    for (auto const& raw: split(prompt, '\n'))
    {
        auto const line = std::string_view(raw);
        if (line.starts_with("detected objects: "))
            q.objects = list(std::string(line.substr(18)));
        else if (line.starts_with("detected states: "))
            q.states = list(std::string(line.substr(17)));
        else if (line.starts_with("low level skills: "))
            q.lower_skills = list(std::string(line.substr(18)));
        else if (line.starts_with("current skill: "))
        {
            q.skill = trim(line.substr(15));
            sawSkill = true;
        }
    }
    if (!sawSkill)
        throw ParseError("not a critic prompt: no current skill line");
    return q;
}

std::optional<CriticVerdict> parse_verdict(std::string_view text)
{
    std::vector<std::string> lines;
    for (auto const& l: split(text, '\n'))
        if (auto t = trim(l); !t.empty())
            lines.push_back(std::move(t));
    if (lines.empty() || lines.size() > 2)
        return std::nullopt;

    static std::regex const head(R"(^executable:\s*(yes|no|true|false)\.?$)", std::regex::icase);
    static std::regex const tail(R"(^feedback:\s*(.*)$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(lines[0], m, head))
        return std::nullopt;
    auto const word = normalize_text(m[1].str());
    bool const yes = word == "yes" || word == "true";

    std::string feedback;
    if (lines.size() == 2)
    {
        if (!std::regex_match(lines[1], m, tail))
            return std::nullopt;
        feedback = trim(m[1].str());
    }
    auto const none = feedback.empty() || normalize_skill_text(feedback) == "none";
    if (yes)
        return CriticVerdict::executable_verdict();
    if (none)
        return std::nullopt;
    return CriticVerdict::blocked(feedback, Cause::Unknown);
}

CriticVerdict judge(LmBackend& lm, std::string_view skill, Perception const& perception,
                    std::vector<std::string> const& lower_skills)
{
    check_perception(perception);
    CompletionRequest req { build_critic_prompt(skill, perception, lower_skills), 0.0, 64, Purpose::Critic };
    auto const first = lm.complete(req);
    if (auto v = parse_verdict(first))
        return *v;
    req.prompt = "Answer in exactly two lines: Executable: yes or no, then Feedback.\n" + req.prompt;
    auto const second = lm.complete(req);
    if (auto v = parse_verdict(second))
        return *v;
    throw UnparseableVerdictError(fmt::format("critic reply is not a verdict after a retry: '{}'", trim(second)));
}

// Oracle ---------------------------------------------------------------------------

CriticVerdict oracle_judge(WorldState const& state, SkillDatabase const& db, std::string_view skill)
{
    auto const plan = resolve_primitives(db, skill);
    auto const run = dry_run(state, plan);
    if (run.success)
        return CriticVerdict::executable_verdict();
    return CriticVerdict::blocked(run.failure_reason, Cause::Unknown);
}

Cause classify_cause(WorldState const& training_reset, WorldState const& target_reset, SkillDatabase const& db,
                     std::string_view skill)
{
    auto const plan = resolve_primitives(db, skill);
    bool const trainOk = dry_run(training_reset, plan).success;
    bool const targetOk = dry_run(target_reset, plan).success;
    return trainOk && !targetOk ? Cause::Domain : Cause::Observational;
}

LmCritic::LmCritic(std::shared_ptr<LmBackend> lm, std::shared_ptr<PerceptionBackend> perception, bool show_lower_skills):
    _lm(std::move(lm)), _perception(std::move(perception)), _showLower(show_lower_skills)
{
    if (!_lm || !_perception)
        throw ConfigError("the critic needs an LM backend and a perception backend");
}

std::string LmCritic::id() const
{
    return fmt::format("lm:{}+{}", _lm->id(), _perception->id());
}

CriticReport LmCritic::assess(CriticContext const& ctx, std::string_view skill)
{
    auto p = _perception->perceive(ctx.observation);
    auto const v = judge(*_lm, skill, p, _showLower ? ctx.lower_skills : std::vector<std::string> {});
    return { v, std::move(p), true };
}

CriticReport OracleCritic::assess(CriticContext const& ctx, std::string_view skill)
{
    auto const before = state_hash(ctx.live);
    auto const v = oracle_judge(ctx.live, _db, skill);
    return { v, std::nullopt, state_hash(ctx.live) == before };
}

} // namespace semgro
