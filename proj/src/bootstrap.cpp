// SPDX-License-Identifier: Apache-2.0
#include <semgro/bootstrap.hpp>
#include <semgro/planner.hpp>

#include <algorithm>
#include <random>
#include <regex>

#include <fmt/format.h>
#include <json.hpp>

namespace semgro
{

using nlohmann::json;

std::vector<SkillEntry> primitive_inventory(WorldState const& world)
{
    std::vector<SkillEntry> out;
    auto add = [&](Action a, WorldObject const& o, WorldObject const* target = nullptr) {
        SkillPrimitive p { a, o.name, target ? std::optional<std::string>(target->name) : std::nullopt };
        std::set<std::string> names { o.label };
        if (target)
            names.insert(target->label);
        out.push_back({ { 1, static_cast<int>(out.size()) + 1 }, p.str(), std::move(names), {} });
    };
    for (auto const& [name, o]: world.objects)
    {
        add(Action::Walk, o);
        add(Action::Find, o);
        if (o.props.graspable)
            add(Action::Grab, o);
        if (o.props.openable)
        {
            add(Action::Open, o);
            add(Action::Close, o);
        }
        if (o.props.switchable)
        {
            add(Action::SwitchOn, o);
            add(Action::SwitchOff, o);
        }
        if (o.props.sittable)
            add(Action::Sit, o);
    }
    for (auto const& [name, o]: world.objects)
        if (o.props.graspable)
            for (auto const& [destName, dest]: world.objects)
                if (destName != name && (dest.props.container || dest.props.surface))
                    add(Action::Put, o, &dest);
    return out;
}

// Prompts ------------------------------------------------------------------------

namespace
{
    std::vector<std::string> split_list(std::string_view text)
    {
        std::vector<std::string> out;
        for (auto const& item: split(text, ','))
            if (auto t = trim(item); !t.empty())
                out.push_back(std::move(t));
        return out;
    }

    std::string last_line_after(std::string_view prompt, std::string_view marker)
    {
        auto const pos = prompt.rfind(marker);
        if (pos == std::string_view::npos)
            throw ParseError(fmt::format("prompt has no '{}' line", trim(marker)));
        auto rest = prompt.substr(pos + marker.size());
        return std::string(rest.substr(0, rest.find('\n')));
    }
} // namespace

std::string build_chainer_prompt(std::vector<std::string> const& library, std::vector<std::string> const& steps)
{
    if (library.empty())
        throw Error("cannot chain from an empty skill library");
    return fill_template(prompt_template("chainer").text,
                         { { "library", join(library, ", ") }, { "steps", number_steps(steps, true) } });
}

ChainerQuery parse_chainer_prompt(std::string_view prompt)
{
    ChainerQuery q;
    q.library = split_list(last_line_after(prompt, "\nSkill Library: "));
    q.steps = parse_numbered_steps(last_line_after(prompt, "\nSkill Steps: "));
    return q;
}

std::string build_summarizer_prompt(std::vector<std::string> const& steps)
{
    if (steps.empty())
        throw Error("nothing to summarize");
    return fill_template(prompt_template("summarizer").text, { { "steps", number_steps(steps) } });
}

std::vector<std::string> parse_summarizer_prompt(std::string_view prompt)
{
    return parse_numbered_steps(last_line_after(prompt, "\nSkill Steps: "));
}

// Chaining -----------------------------------------------------------------------

namespace
{
    std::vector<SkillEntry const*> level_entries(SkillDatabase const& db, int level)
    {
        std::vector<SkillEntry const*> out;
        for (auto const& e: db.entries())
            if (e.id.level == level)
                out.push_back(&e);
        return out;
    }

    /// Entries whose expansion runs from `state`. Only successful probes pay for a fresh copy.
    std::vector<SkillEntry const*> executable(WorldState const& state, SkillDatabase const& db,
                                              std::vector<SkillEntry const*> const& entries)
    {
        std::vector<SkillEntry const*> out;
        auto scratch = state;
        for (auto const* e: entries)
        {
            auto const r = run_primitives(scratch, resolve_primitives(db, e->semantic));
            if (r.success)
                out.push_back(e);
            if (!r.executed.empty())
                scratch = state;
        }
        return out;
    }
} // namespace

ChainEpisode chain_skills(WorldState const& reset, SkillDatabase const& db, int from_level, LmBackend& lm,
                          std::size_t max_steps, std::uint64_t seed, std::vector<ObservationRecord>* records)
{
    auto const pool = level_entries(db, from_level);
    if (pool.empty())
        throw Error(fmt::format("no level-{} skills to chain", from_level));
    if (max_steps == 0)
        throw ConfigError("max_steps must be at least 1");

    ChainEpisode ep;
    auto state = reset;
    auto run = [&](SkillEntry const& e) {
        ep.steps.push_back(e.semantic);
        ep.ids.push_back(e.id);
        for (auto const& p: resolve_primitives(db, e.semantic))
        {
            auto const outcome = apply(state, p);
            if (!outcome.success)
            {
                ep.failure_reason = outcome.failure_reason;
                return false;
            }
            auto const obs = observe(state);
            ep.observations.push_back(obs.snapshot_id);
            ep.object_names.insert(obs.object_names.begin(), obs.object_names.end());
            if (records)
                records->push_back({ obs.snapshot_id, obs.object_names, obs.object_states });
        }
        return true;
    };

    // initial skill: seeded, among those that run from the reset when there are any
    auto starts = executable(state, db, pool);
    if (starts.empty())
        starts = pool;
    std::mt19937_64 rng(seed);
    auto const& first = *starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];
    ep.start_skill = first.semantic;
    if (!run(first))
        return ep;

    while (ep.steps.size() < max_steps)
    {
        auto const options = executable(state, db, pool);
        if (options.empty())
            break;
        std::vector<std::string> library;
        for (auto const* e: options)
            library.push_back(e->semantic);
        CompletionRequest const req { build_chainer_prompt(library, ep.steps), 0.0, 64, Purpose::Chainer };
        auto const reply = clean_skill_output(lm.complete(req));
        if (normalize_skill_text(reply) == ChainEndToken)
            break;
        auto const* chosen = db.find_semantic(reply);
        if (!chosen || chosen->id.level != from_level)
            throw UnparseableOutputError(fmt::format("chainer picked '{}', which is not a level-{} skill", reply, from_level),
                                         reply);
        if (!run(*chosen))
            return ep;
    }
    ep.success = true;
    return ep;
}

std::string summarize_chain(LmBackend& lm, ChainEpisode const& episode)
{
    if (!episode.success || episode.steps.size() < 2)
        throw Error("only successful chains of two or more steps are summarized");
    CompletionRequest const req { build_summarizer_prompt(episode.steps), 0.0, 64, Purpose::Summarizer };
    auto text = trim(split(lm.complete(req), '\n').front());
    if (starts_with_ci(text, "summary:"))
        text = trim(std::string_view(text).substr(8));
    text = normalize_skill_text(text);
    if (text.empty())
        throw EmptyResponseError("summarizer returned nothing");
    for (auto const& s: episode.steps)
        if (normalize_skill_text(s) == text)
            throw Error(fmt::format("degenerate summary '{}' repeats a step", text));
    if (text.find(',') != std::string::npos)
        throw Error(fmt::format("summary '{}' contains a comma, which would break library lists", text));
    return text;
}

// Hierarchy ----------------------------------------------------------------------

BootstrapResult build_hierarchy(WorldState const& reset, std::vector<SkillEntry> level1, LmBackend& lm,
                                Embedder const& embedder, BootstrapConfig const& config)
{
    if (level1.empty())
        throw ConfigError("bootstrap needs level-1 skills");
    if (config.levels < 2)
        throw ConfigError("bootstrap needs at least two levels");
    for (auto const& e: level1)
        if (e.id.level != 1)
            throw ConfigError(fmt::format("entry {} is not a level-1 skill", e.id.str()));

    std::vector<SkillEntry> entries = std::move(level1);
    auto db = SkillDatabase::from_entries(entries);
    if (auto v = validate(db); !v.empty())
        throw DatabaseError(std::move(v));

    std::map<std::string, ObservationRecord> observations;
    std::vector<LevelReport> reports;
    for (int m = 2; m <= config.levels; ++m)
    {
        LevelReport report;
        report.level = m;
        std::vector<EmbeddingVector> seen;
        std::set<std::vector<SkillId>> plans;
        for (std::size_t e = 0; e < config.budget; ++e)
        {
            ++report.episodes;
            auto const seed = fnv1a64(fmt::format("{}:{}:{}", config.seed, m, e));
            std::vector<ObservationRecord> records;
            auto const ep = chain_skills(reset, db, m - 1, lm, config.max_steps, seed, &records);
            if (!ep.success)
            {
                ++report.failed;
                continue;
            }
            if (ep.steps.size() < 2)
            {
                ++report.too_short;
                continue;
            }
            std::string summary;
            try
            {
                summary = summarize_chain(lm, ep);
            }
            catch (EmptyResponseError const&)
            {
                ++report.degenerate;
                continue;
            }
            catch (LmError const&)
            {
                throw;
            }
            catch (Error const&)
            {
                ++report.degenerate;
                continue;
            }
            auto const vec = embedder.embed(summary);
            bool const near = std::any_of(seen.begin(), seen.end(),
                                          [&](EmbeddingVector const& v) { return cosine(v, vec) >= config.dedup_cosine; });
            bool const taken = std::any_of(entries.begin(), entries.end(), [&](SkillEntry const& x) {
                return normalize_skill_text(x.semantic) == summary;
            });
            if (near || taken || plans.contains(ep.ids))
            {
                ++report.duplicates;
                continue;
            }
            seen.push_back(vec);
            plans.insert(ep.ids);
            entries.push_back({ { m, static_cast<int>(++report.entries) }, summary, ep.object_names, ep.ids });
            for (auto& r: records)
                observations.emplace(r.snapshot_id, std::move(r));
        }
        reports.push_back(report);
        if (report.entries == 0)
            throw BootstrapError(fmt::format("level {} got no entries after {} episodes ({} failed, {} too short, {} "
                                             "degenerate, {} duplicates)",
                                             m, report.episodes, report.failed, report.too_short, report.degenerate,
                                             report.duplicates),
                                 reports);
        db = SkillDatabase::from_entries(entries);
    }
    if (auto v = validate(db); !v.empty())
        throw DatabaseError(std::move(v));

    BootstrapResult result;
    result.db = std::move(db);
    for (auto& [id, r]: observations)
        result.observations.push_back(std::move(r));
    result.levels = reports;

    json levels = json::array();
    for (auto const& r: reports)
        levels.push_back({ { "level", r.level },
                           { "episodes", r.episodes },
                           { "failed", r.failed },
                           { "too_short", r.too_short },
                           { "degenerate", r.degenerate },
                           { "duplicates", r.duplicates },
                           { "entries", r.entries } });
    json const manifest = {
        { "world", reset.world_id },
        { "seed", config.seed },
        { "levels", config.levels },
        { "budget_per_level", config.budget },
        { "max_steps", config.max_steps },
        { "dedup_cosine", config.dedup_cosine },
        { "lm", lm.id() },
        { "embedder", embedder.id() },
        { "level1", result.db.count(1) },
        { "per_level", levels },
        { "observations", result.observations.size() },
        { "database_sha256", sha256_hex(serialize_database(result.db)) },
        { "choices",
          { { "initial_skill", "seeded uniform draw among skills executable from the reset" },
            { "library", "skills of the previous level executable in the current state" },
            { "failure", "a failed step ends the episode and the episode is discarded" },
            { "min_chain", 2 } } },
    };
    result.manifest = manifest.dump(1) + "\n";
    return result;
}

// Scripted chainer and summarizer ---------------------------------------------------

namespace
{
    struct Household
    {
        std::map<std::string, WorldObject> objects;

        [[nodiscard]] std::string label(std::string const& name) const
        {
            auto it = objects.find(name);
            return it == objects.end() ? name : it->second.label;
        }
        [[nodiscard]] bool receptacle(std::string const& name) const
        {
            auto it = objects.find(name);
            return it != objects.end() && (it->second.props.container || it->second.props.surface);
        }
        [[nodiscard]] std::string relation(std::string const& name) const
        {
            auto it = objects.find(name);
            return it != objects.end() && it->second.props.container ? "in" : "on";
        }
    };

    std::optional<std::vector<SkillPrimitive>> as_primitives(std::vector<std::string> const& items)
    {
        std::vector<SkillPrimitive> out;
        for (auto const& s: items)
        {
            auto p = parse_primitive(s);
            if (!p || p->str() != normalize_skill_text(s))
                return std::nullopt;
            out.push_back(*p);
        }
        return out;
    }

    std::string pick(std::vector<std::string> const& options, std::string_view key)
    {
        return *std::min_element(options.begin(), options.end(), [&](auto const& a, auto const& b) {
            return fnv1a64(fmt::format("{}|{}", key, a)) < fnv1a64(fmt::format("{}|{}", key, b));
        });
    }

    std::string primitive_next(ChainerQuery const& q, std::vector<SkillPrimitive> const& steps, Household const& h,
                               std::string_view key)
    {
        std::set<std::string> const lib(q.library.begin(), q.library.end());
        auto has = [&](std::string const& s) { return lib.contains(s); };
        std::vector<std::string> holding;
        std::set<std::string> opened;
        for (auto const& p: steps)
        {
            if (p.action == Action::Grab)
                holding.push_back(p.object);
            else if (p.action == Action::Put)
                std::erase(holding, p.object);
            else if (p.action == Action::Open)
                opened.insert(p.object);
        }
        auto const& last = steps.back();
        auto const x = last.object;
        std::string const end(ChainEndToken);
        switch (last.action)
        {
        case Action::Walk:
            for (auto const& held: holding)
                if (has(fmt::format("put {} {}", held, x)))
                    return fmt::format("put {} {}", held, x);
            if (!holding.empty())
                return has("open " + x) ? "open " + x : end;
            for (auto const* verb: { "grab", "switchon", "open", "sit" })
                if (has(fmt::format("{} {}", verb, x)))
                    return fmt::format("{} {}", verb, x);
            return end;
        case Action::Grab:
        {
            std::vector<std::string> walks;
            for (auto const& s: q.library)
                if (auto p = parse_primitive(s); p && p->action == Action::Walk && p->object != x && h.receptacle(p->object))
                    walks.push_back(s);
            return walks.empty() ? end : pick(walks, key);
        }
        case Action::Open:
        {
            for (auto const& held: holding)
                if (has(fmt::format("put {} {}", held, x)))
                    return fmt::format("put {} {}", held, x);
            std::vector<std::string> grabs;
            for (auto const& [name, o]: h.objects)
                if (o.parent == x && has("grab " + name))
                    grabs.push_back("grab " + name);
            return grabs.empty() ? end : pick(grabs, key);
        }
        case Action::Put:
        {
            auto const dest = *last.target;
            if (opened.contains(dest) && has("close " + dest))
                return "close " + dest;
            return end;
        }
        default:
            return end;
        }
    }

    bool content_word(std::string const& w)
    {
        static std::set<std::string> const stop { "and", "the", "in", "on", "it", "then", "put", "place", "open",
                                                  "close", "a", "to", "of", "walk", "grab", "pick", "up", "turn" };
        return !stop.contains(w);
    }

    std::string composite_next(ChainerQuery const& q, std::string_view key)
    {
        std::string const end(ChainEndToken);
        if (q.steps.size() >= 3 || (q.steps.size() >= 2 && unit_hash(fmt::format("stop|{}", key)) < 0.4))
            return end;
        std::set<std::string> mine;
        for (auto const& s: q.steps)
            for (auto const& w: tokenize(s))
                if (content_word(w))
                    mine.insert(w);
        std::set<std::string> used;
        for (auto const& s: q.steps)
            used.insert(normalize_skill_text(s));
        std::size_t best = 0;
        std::vector<std::string> top;
        for (auto const& s: q.library)
        {
            if (used.contains(normalize_skill_text(s)))
                continue;
            std::size_t shared = 0;
            for (auto const& w: tokenize(s))
                shared += mine.contains(w) ? 1 : 0;
            if (shared > best)
            {
                best = shared;
                top.clear();
            }
            if (shared == best && shared > 0)
                top.push_back(s);
        }
        if (top.empty() && q.steps.size() == 1)
            for (auto const& s: q.library)
                if (!used.contains(normalize_skill_text(s)))
                    top.push_back(s);
        return top.empty() ? end : pick(top, key);
    }

    std::string and_list(std::vector<std::string> const& items)
    {
        return join(items, " and ");
    }

    std::string summarize_primitives(std::vector<SkillPrimitive> const& steps, Household const& h)
    {
        std::vector<std::pair<std::string, std::string>> puts;
        std::set<std::string> opened;
        std::set<std::string> closed;
        std::vector<std::string> grabbed;
        std::vector<std::string> switched;
        std::vector<std::string> sat;
        for (auto const& p: steps)
            switch (p.action)
            {
            case Action::Put:
                puts.emplace_back(p.object, *p.target);
                break;
            case Action::Open:
                opened.insert(p.object);
                break;
            case Action::Close:
                closed.insert(p.object);
                break;
            case Action::Grab:
                grabbed.push_back(p.object);
                break;
            case Action::SwitchOn:
                switched.push_back(p.object);
                break;
            case Action::Sit:
                sat.push_back(p.object);
                break;
            default:
                break;
            }
        if (!puts.empty())
        {
            auto const dest = puts.front().second;
            std::vector<std::string> things;
            for (auto const& [x, y]: puts)
                if (y == dest)
                    things.push_back(h.label(x));
            auto text = fmt::format("{} {} {} {}", closed.contains(dest) ? "place" : "put", and_list(things),
                                    h.relation(dest), h.label(dest));
            if (opened.contains(dest))
                text = fmt::format("open {} and {}", h.label(dest), text);
            return text;
        }
        if (!switched.empty())
            return "turn on " + h.label(switched.front());
        if (!sat.empty())
            return "sit on " + h.label(sat.front());
        if (!grabbed.empty() && !opened.empty())
            return fmt::format("take {} out of {}", h.label(grabbed.front()), h.label(*opened.begin()));
        if (!grabbed.empty())
        {
            std::vector<std::string> labels;
            for (auto const& g: grabbed)
                labels.push_back(h.label(g));
            return "pick up " + and_list(labels);
        }
        if (!opened.empty())
            return closed.empty() ? "open " + h.label(*opened.begin()) : "check inside " + h.label(*opened.begin());
        return "go to " + h.label(steps.back().object);
    }

    std::vector<std::string> split_and(std::string const& text)
    {
        std::vector<std::string> parts;
        std::string cur;
        for (auto const& tok: split(text, ' '))
        {
            if (tok == "and")
            {
                parts.push_back(trim(cur));
                cur.clear();
            }
            else
                cur += tok + " ";
        }
        parts.push_back(trim(cur));
        return parts;
    }

    std::string summarize_composites(std::vector<std::string> const& steps)
    {
        static std::regex const putLike(R"(^(?:open .+? and )?(?:put|place) (.+?) (in|on) (.+)$)");
        std::vector<std::tuple<std::string, std::string, std::vector<std::string>>> groups; // rel, dest, things
        for (auto const& s: steps)
        {
            std::smatch m;
            auto const t = normalize_skill_text(s);
            if (!std::regex_match(t, m, putLike))
            {
                // a sequence; repeated phrases are said once
                std::vector<std::string> seq;
                for (auto const& x: steps)
                {
                    auto rest = normalize_skill_text(x);
                    for (std::size_t cut; !rest.empty();)
                    {
                        cut = rest.find(" and then ");
                        auto const head = rest.substr(0, cut);
                        rest = cut == std::string::npos ? "" : rest.substr(cut + 10);
                        if (std::find(seq.begin(), seq.end(), head) == seq.end())
                            seq.push_back(head);
                    }
                }
                return join(seq, " and then ");
            }
            auto it = std::find_if(groups.begin(), groups.end(), [&](auto const& g) {
                return std::get<0>(g) == m[2].str() && std::get<1>(g) == m[3].str();
            });
            if (it == groups.end())
            {
                groups.push_back({ m[2].str(), m[3].str(), {} });
                it = std::prev(groups.end());
            }
            auto& things = std::get<2>(*it);
            for (auto const& part: split_and(m[1].str()))
                if (std::find(things.begin(), things.end(), part) == things.end())
                    things.push_back(part);
        }
        std::vector<std::string> parts;
        for (auto const& [rel, dest, things]: groups)
            parts.push_back(fmt::format("{} {} {}", and_list(things), rel, dest));
        return "put " + join(parts, " and ");
    }
} // namespace

void install_bootstrap_policies(ScriptedBackend& lm, WorldState const& world)
{
    auto h = std::make_shared<Household>();
    h->objects = world.objects;
    lm.add_handler(Purpose::Chainer, [h](CompletionRequest const& r) {
        auto const q = parse_chainer_prompt(r.prompt);
        if (q.steps.empty())
            return std::optional<std::string>(std::string(ChainEndToken));
        if (auto prims = as_primitives(q.steps))
            return std::optional<std::string>(primitive_next(q, *prims, *h, r.prompt));
        return std::optional<std::string>(composite_next(q, r.prompt));
    });
    lm.add_handler(Purpose::Summarizer, [h](CompletionRequest const& r) {
        auto const steps = parse_summarizer_prompt(r.prompt);
        if (auto prims = as_primitives(steps))
            return std::optional<std::string>(summarize_primitives(*prims, *h));
        return std::optional<std::string>(summarize_composites(steps));
    });
}

} // namespace semgro
