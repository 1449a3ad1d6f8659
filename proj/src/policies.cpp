// SPDX-License-Identifier: Apache-2.0
#include <semgro/planner.hpp>
#include <semgro/policies.hpp>

#include <algorithm>
#include <regex>
#include <set>

#include <fmt/format.h>

namespace semgro
{

PolicyKnowledge PolicyKnowledge::from(std::vector<TaskSpec> const& tasks, WorldState const& world)
{
    PolicyKnowledge k;
    for (auto const& t: tasks)
        for (auto const& [type, text]: t.instructions)
            k.tasks.emplace(normalize_skill_text(text), t.ground_truth);
    for (auto const& [name, o]: world.objects)
    {
        k.labels.emplace(normalize_text(name), name);
        k.labels.emplace(normalize_text(o.label), name);
        for (auto const& a: o.aliases)
            k.labels.emplace(normalize_text(a), name);
    }
    return k;
}

std::optional<std::string> PolicyKnowledge::object_for(std::string_view label) const
{
    if (auto it = labels.find(normalize_text(label)); it != labels.end())
        return it->second;
    return std::nullopt;
}

bool is_support(Action action) noexcept
{
    return action == Action::Walk || action == Action::Find;
}

namespace
{
    std::optional<Action> action_for(std::string act)
    {
        for (auto const* tail: { " to", " on" })
            if (act.ends_with(tail) && act != "switch on")
                act.resize(act.size() - 3);
        if (act == "switch on")
            act = "switchon";
        else if (act == "switch off")
            act = "switchoff";
        return parse_action(act);
    }

    bool references(SkillPrimitive const& p, std::string const& name)
    {
        return p.object == name || (p.target && *p.target == name);
    }

    std::vector<TargetStep> unpinned(std::vector<SkillPrimitive> const& ps)
    {
        std::vector<TargetStep> out;
        for (auto const& p: ps)
            out.push_back({ p, false });
        return out;
    }

    std::string const FallbackGlue = ", keeping in mind that ";
} // namespace

// φ_R grammar --------------------------------------------------------------------

std::optional<RefinementGrammar> parse_refinement_text(std::string_view text)
{
    static std::regex const positive(R"(^(?:(.+) and after that )?first (open|switch on|walk to|grab) the (.+?), then (.+)$)");
    static std::regex const negative(
        R"(^(?:(.+) and after that )?(.+), but do not (walk to|grab|open|close|switchon|switchoff|sit on|sit) the (.+)$)");
    auto const t = normalize_skill_text(text);
    std::smatch m;
    if (std::regex_match(t, m, positive))
        return RefinementGrammar { m[4].str(), m[1].str(), m[2].str(), m[3].str(), false };
    if (std::regex_match(t, m, negative))
        return RefinementGrammar { m[2].str(), m[1].str(), m[3].str(), m[4].str(), true };
    return std::nullopt;
}

std::pair<std::string, std::string> split_blocked(std::string_view skill, std::string_view feedback)
{
    static std::set<std::string> const filler { "the", "is", "are", "not", "you", "from", "here", "closed", "inside",
                                                "near", "see", "reachable", "holding", "already", "open", "your",
                                                "hands", "full", "cannot", "can", "a", "an", "of", "to", "in", "on" };
    static std::string const glue = " and then ";
    auto const s = normalize_skill_text(skill);
    std::vector<std::string> segments;
    std::string_view rest = s;
    for (std::size_t cut; !rest.empty();)
    {
        cut = rest.find(glue);
        segments.emplace_back(rest.substr(0, cut));
        rest = cut == std::string_view::npos ? std::string_view {} : rest.substr(cut + glue.size());
    }
    if (segments.size() < 2)
        return { {}, s };
    auto const f = normalize_skill_text(feedback);
    auto const cause = f.substr(0, f.find(','));
    std::set<std::string> subject;
    for (auto const& t: tokenize(cause))
        if (!filler.contains(t))
            subject.insert(t);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < segments.size() && hit == 0; ++i)
        for (auto const& t: tokenize(segments[i]))
            if (subject.contains(t))
            {
                hit = i;
                break;
            }
    std::string prefix;
    for (std::size_t i = 0; i < hit; ++i)
        prefix += (i ? glue : std::string {}) + segments[i];
    return { prefix, segments[hit] };
}

std::string blocked_segment(std::string_view skill, std::string_view feedback)
{
    return split_blocked(skill, feedback).second;
}

std::string scripted_refinement(std::string_view skill, std::string_view feedback)
{
    static std::regex const need(R"(you need to (open|switch on|walk to|grab) the ([^,]+)$)");
    static std::regex const needless(R"(you do not need to (walk to|grab|open|close|switchon|switchoff|sit) the ([^,]+)$)");
    auto const f = normalize_skill_text(feedback);
    auto const [prefix, s] = split_blocked(skill, feedback);
    // the segments that still work go first, the fix sits right before the one that does not
    auto const lead = prefix.empty() ? std::string {} : prefix + " and after that ";
    std::smatch m;
    if (std::regex_search(f, m, need))
        return fmt::format("{}first {} the {}, then {}", lead, m[1].str(), m[2].str(), s);
    if (std::regex_search(f, m, needless))
        return fmt::format("{}{}, but do not {} the {}", lead, s, m[1].str(), m[2].str());
    return (prefix.empty() ? s : prefix + " and then " + s) + FallbackGlue + f;
}

std::vector<TargetStep> patch_target(std::vector<SkillPrimitive> const& base, RefinementGrammar const& fix,
                                     PolicyKnowledge const& knowledge)
{
    auto out = unpinned(base);
    auto const object = knowledge.object_for(fix.label);
    auto const action = action_for(fix.act);
    if (!object || !action)
        return out;
    auto const& f = *object;
    auto first_ref = [&](auto&& pred) {
        return std::find_if(out.begin(), out.end(), [&](TargetStep const& s) { return references(s.primitive, f) && pred(s); });
    };

    if (fix.negative)
    {
        auto it = std::find_if(out.begin(), out.end(), [&](TargetStep const& s) {
            return s.primitive.action == *action && s.primitive.object == f;
        });
        if (it != out.end())
            out.erase(it);
        return out;
    }

    switch (*action)
    {
    case Action::Open:
    case Action::SwitchOn:
    {
        // "first open the X": before anything else when the plan never mentions X
        auto it = first_ref([](TargetStep const&) { return true; });
        if (it == out.end())
            it = out.begin();
        if (it != out.end() && is_support(it->primitive.action) && it->primitive.object == f)
        {
            while (it != out.end() && is_support(it->primitive.action) && it->primitive.object == f)
                ++it;
            out.insert(it, { SkillPrimitive { *action, f, std::nullopt }, true });
        }
        else
            out.insert(it, { SkillPrimitive { *action, f, std::nullopt }, true });
        break;
    }
    case Action::Walk:
    {
        auto it = first_ref([](TargetStep const&) { return true; });
        if (it != out.end() && it->primitive.action == Action::Walk)
            it->pinned = true;
        else
            out.insert(it == out.end() ? out.begin() : it, { SkillPrimitive { Action::Walk, f, std::nullopt }, true });
        break;
    }
    case Action::Grab:
    {
        auto it = first_ref([](TargetStep const& s) { return !is_support(s.primitive.action); });
        if (it == out.end())
            it = out.begin();
        out.insert(it, { SkillPrimitive { Action::Grab, f, std::nullopt }, true });
        break;
    }
    default:
        break;
    }
    return out;
}

// Progress ------------------------------------------------------------------------

std::vector<TargetStep> remaining_target(std::vector<TargetStep> const& target, std::vector<SkillPrimitive> const& history)
{
    std::size_t next = 0;          // position in target after the last matched manipulation
    std::size_t lastMatch = 0;     // history position after the last matched manipulation
    for (std::size_t p = 0; p < history.size(); ++p)
    {
        auto const& h = history[p];
        if (is_support(h.action))
            continue;
        auto it = std::find_if(target.begin() + static_cast<std::ptrdiff_t>(next), target.end(),
                               [](TargetStep const& s) { return !is_support(s.primitive.action); });
        if (it != target.end() && it->primitive == h)
        {
            next = static_cast<std::size_t>(it - target.begin()) + 1;
            lastMatch = p + 1;
        }
    }
    std::vector<TargetStep> rest(target.begin() + static_cast<std::ptrdiff_t>(next), target.end());

    std::multiset<std::string> walked;
    for (std::size_t p = lastMatch; p < history.size(); ++p)
        if (is_support(history[p].action))
            walked.insert(history[p].str());
    std::size_t drop = 0;
    while (drop < rest.size() && is_support(rest[drop].primitive.action))
    {
        auto it = walked.find(rest[drop].primitive.str());
        if (it == walked.end())
            break;
        walked.erase(it);
        ++drop;
    }
    rest.erase(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(drop));
    return rest;
}

std::vector<RankedCandidate> rank_candidates(std::vector<std::string> const& candidates,
                                             std::vector<TargetStep> const& remaining, SkillDatabase const& db)
{
    struct Scored
    {
        RankedCandidate c;
        std::size_t lcp = 0;
        std::size_t shared = 0;
        std::size_t order = 0;
    };

    std::vector<std::size_t> manip; // positions of manipulation steps in `remaining`
    std::set<std::string> targetObjects;
    for (std::size_t i = 0; i < remaining.size(); ++i)
    {
        if (!is_support(remaining[i].primitive.action))
            manip.push_back(i);
        targetObjects.insert(remaining[i].primitive.object);
    }

    std::vector<Scored> scored;
    for (std::size_t order = 0; order < candidates.size(); ++order)
    {
        Scored s;
        s.order = order;
        s.c.semantic = candidates[order];
        std::vector<SkillPrimitive> prims;
        try
        {
            prims = resolve_primitives(db, candidates[order]);
        }
        catch (Error const&)
        {
            scored.push_back(s);
            continue;
        }
        if (auto const* e = db.find_semantic(candidates[order]))
            s.c.level = e->id.level;

        std::vector<SkillPrimitive> cm;
        std::vector<SkillPrimitive> cs;
        for (auto const& p: prims)
            (is_support(p.action) ? cs : cm).push_back(p);

        // region of the remaining target this candidate would account for
        std::size_t regionEnd = 0;
        bool fits = false;
        if (!cm.empty())
        {
            fits = cm.size() <= manip.size();
            for (std::size_t i = 0; fits && i < cm.size(); ++i)
                fits = remaining[manip[i]].primitive == cm[i];
            if (fits)
                regionEnd = manip[cm.size() - 1] + 1;
        }
        else
        {
            regionEnd = manip.empty() ? remaining.size() : manip.front();
            fits = false;
            for (auto const& p: cs)
                for (std::size_t i = 0; i < regionEnd; ++i)
                    fits = fits || remaining[i].primitive == p;
        }
        if (fits)
        {
            std::multiset<std::string> mine;
            for (auto const& p: cs)
                mine.insert(p.str());
            for (std::size_t i = 0; i < regionEnd; ++i)
            {
                auto const& t = remaining[i];
                if (!is_support(t.primitive.action))
                    continue;
                auto it = mine.find(t.primitive.str());
                if (it != mine.end())
                    mine.erase(it);
                else if (t.pinned)
                    fits = false;
                else
                    ++s.c.skipped;
            }
            s.c.extra = mine.size();
            s.c.covered = cm.size();
        }
        s.c.fits = fits;

        while (s.lcp < prims.size() && s.lcp < remaining.size() && prims[s.lcp] == remaining[s.lcp].primitive)
            ++s.lcp;
        for (auto const& p: prims)
            s.shared += targetObjects.contains(p.object) ? 1 : 0;
        scored.push_back(s);
    }

    std::stable_sort(scored.begin(), scored.end(), [](Scored const& a, Scored const& b) {
        if (a.c.fits != b.c.fits)
            return a.c.fits;
        if (a.c.fits)
        {
            // progress net of the support steps a candidate would skip
            auto const na = static_cast<long>(a.c.covered) - static_cast<long>(a.c.skipped);
            auto const nb = static_cast<long>(b.c.covered) - static_cast<long>(b.c.skipped);
            if (na != nb)
                return na > nb;
            if (a.lcp != b.lcp)
                return a.lcp > b.lcp;
            if (a.c.extra != b.c.extra)
                return a.c.extra < b.c.extra;
            return a.c.level > b.c.level;
        }
        if (a.lcp != b.lcp)
            return a.lcp > b.lcp;
        return a.shared > b.shared;
    });
    std::vector<RankedCandidate> out;
    for (auto& s: scored)
        out.push_back(std::move(s.c));
    return out;
}

// Planner ------------------------------------------------------------------------

ScriptedPlanner::ScriptedPlanner(SkillDatabase const& db, PolicyKnowledge knowledge, double slip, std::string salt):
    _db(db), _knowledge(std::move(knowledge)), _slip(slip), _salt(std::move(salt))
{
    if (slip < 0.0 || slip >= 1.0)
        throw ConfigError(fmt::format("slip probability {} is outside [0, 1)", slip));
}

std::optional<std::vector<TargetStep>> ScriptedPlanner::target_for(std::string_view instruction) const
{
    auto const key = normalize_skill_text(instruction);
    if (auto it = _knowledge.tasks.find(key); it != _knowledge.tasks.end())
        return unpinned(it->second);
    auto expand = [&](std::string const& skill) -> std::optional<std::vector<SkillPrimitive>> {
        try
        {
            return resolve_primitives(_db, skill);
        }
        catch (Error const&)
        {
        }
        // a sequence that is not an entry itself: its segments one after another
        static std::string const glue = " and then ";
        if (skill.find(glue) == std::string::npos)
            return std::nullopt;
        std::vector<SkillPrimitive> out;
        std::string_view rest = skill;
        for (std::size_t cut; !rest.empty();)
        {
            cut = rest.find(glue);
            try
            {
                auto const ps = resolve_primitives(_db, rest.substr(0, cut));
                out.insert(out.end(), ps.begin(), ps.end());
            }
            catch (Error const&)
            {
                return std::nullopt;
            }
            rest = cut == std::string_view::npos ? std::string_view {} : rest.substr(cut + glue.size());
        }
        return out;
    };
    if (auto g = parse_refinement_text(key))
        if (auto base = expand(g->skill))
        {
            auto lead = g->prefix.empty() ? std::optional<std::vector<SkillPrimitive>>(std::in_place) : expand(g->prefix);
            if (lead)
            {
                auto out = unpinned(*lead);
                auto patched = patch_target(*base, *g, _knowledge);
                out.insert(out.end(), patched.begin(), patched.end());
                return out;
            }
        }
    if (auto pos = key.find(FallbackGlue); pos != std::string::npos)
        if (auto base = expand(key.substr(0, pos)))
            return unpinned(*base);
    if (auto base = expand(key))
        return unpinned(*base);
    return std::nullopt;
}

std::string ScriptedPlanner::generate(std::string_view prompt) const
{
    auto const q = parse_generator_prompt(prompt);
    if (q.candidates.empty())
        throw Error("generator prompt has no candidates");
    auto const target = target_for(q.instruction);
    if (!target)
    {
        // unknown instruction: word overlap, first candidate on ties
        auto const words = tokenize(q.instruction);
        std::set<std::string> const want(words.begin(), words.end());
        std::size_t best = 0;
        std::size_t bestScore = 0;
        for (std::size_t i = 0; i < q.candidates.size(); ++i)
        {
            std::size_t score = 0;
            for (auto const& w: tokenize(q.candidates[i]))
                score += want.contains(w) ? 1 : 0;
            if (score > bestScore)
            {
                best = i;
                bestScore = score;
            }
        }
        return q.candidates[best];
    }

    std::vector<SkillPrimitive> history;
    for (auto const& h: q.history)
    {
        try
        {
            auto const ps = resolve_primitives(_db, h);
            history.insert(history.end(), ps.begin(), ps.end());
        }
        catch (Error const&)
        {
        }
    }
    auto const rest = remaining_target(*target, history);
    if (rest.empty())
        return std::string(DoneToken);
    auto const ranked = rank_candidates(q.candidates, rest, _db);
    if (ranked.size() > 1 && unit_hash(fmt::format("slip|{}|{}", _salt, prompt)) < _slip)
        return ranked[1].semantic;
    return ranked.front().semantic;
}

std::string ScriptedPlanner::refine(std::string_view prompt) const
{
    auto const q = parse_refinement_prompt(prompt);
    return scripted_refinement(q.skill, q.feedback);
}

void install(ScriptedBackend& lm, std::shared_ptr<ScriptedPlanner const> planner)
{
    if (!planner)
        throw ConfigError("no planner to install");
    lm.add_handler(Purpose::Generator, [planner](CompletionRequest const& r) {
        return std::optional<std::string>(planner->generate(r.prompt));
    });
    lm.add_handler(Purpose::Retriever, [planner](CompletionRequest const& r) {
        return std::optional<std::string>(planner->refine(r.prompt));
    });
}

} // namespace semgro
