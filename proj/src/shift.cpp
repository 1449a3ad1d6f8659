// SPDX-License-Identifier: Apache-2.0
#include <semgro/worldsim.hpp>

#include <algorithm>
#include <functional>
#include <random>

#include <fmt/format.h>

namespace semgro
{

std::string_view to_string(ShiftKind kind)
{
    switch (kind)
    {
    case ShiftKind::None:
        return "None";
    case ShiftKind::OL:
        return "OL";
    case ShiftKind::PA:
        return "PA";
    case ShiftKind::RS:
        return "RS";
    }
    return "?";
}

std::string_view to_string(ShiftDegree degree)
{
    switch (degree)
    {
    case ShiftDegree::None:
        return "None";
    case ShiftDegree::Small:
        return "Small";
    case ShiftDegree::Medium:
        return "Medium";
    case ShiftDegree::Large:
        return "Large";
    }
    return "?";
}

ShiftKind parse_shift_kind(std::string_view text)
{
    for (auto k: { ShiftKind::None, ShiftKind::OL, ShiftKind::PA, ShiftKind::RS })
        if (normalize_text(to_string(k)) == normalize_text(text))
            return k;
    throw ParseError(fmt::format("unknown shift kind '{}'", text));
}

ShiftDegree parse_shift_degree(std::string_view text)
{
    for (auto d: { ShiftDegree::None, ShiftDegree::Small, ShiftDegree::Medium, ShiftDegree::Large })
        if (normalize_text(to_string(d)) == normalize_text(text))
            return d;
    throw ParseError(fmt::format("unknown shift degree '{}'", text));
}

CalibrationBand calibration_band(ShiftDegree degree)
{
    switch (degree)
    {
    case ShiftDegree::None:
        return { 0.0, 0.0, 0.0 };
    case ShiftDegree::Small:
        return { 0.0, 0.15, 0.20 };
    case ShiftDegree::Medium:
        return { 0.20, 0.25, 0.30 };
    case ShiftDegree::Large:
        return { 0.50, 0.50, 1.00 };
    }
    return {};
}

ShiftDegree degree_for_fraction(double fraction)
{
    if (fraction <= 0.0)
        return ShiftDegree::None;
    if (fraction <= 0.20)
        return ShiftDegree::Small;
    if (fraction <= 0.30)
        return ShiftDegree::Medium;
    return ShiftDegree::Large;
}

namespace
{
    struct TopLevelPlans
    {
        std::vector<std::vector<SkillPrimitive>> plans; ///< only plans that succeed in the base world
        std::size_t considered = 0;
    };

    TopLevelPlans top_level_plans(WorldState const& base, SkillDatabase const& db)
    {
        TopLevelPlans out;
        int const top = db.max_level();
        for (auto const& e: db.entries())
        {
            if (e.id.level != top || top < 2)
                continue;
            ++out.considered;
            auto plan = resolve_primitives(db, e.semantic);
            if (dry_run(base, plan).success)
                out.plans.push_back(std::move(plan));
        }
        return out;
    }

    double failing_fraction(WorldState const& world, TopLevelPlans const& plans, std::size_t* failing = nullptr)
    {
        if (plans.plans.empty())
            return 0.0;
        std::size_t n = 0;
        for (auto const& plan: plans.plans)
            if (!dry_run(world, plan).success)
                ++n;
        if (failing)
            *failing = n;
        return static_cast<double>(n) / static_cast<double>(plans.plans.size());
    }

    struct Perturbation
    {
        std::string description;
        std::function<bool(WorldState&)> apply;
        bool focused = false;
    };

    bool is_descendant(WorldState const& s, std::string const& candidate, std::string const& of)
    {
        auto const chain = s.ancestors(candidate);
        return std::find(chain.begin(), chain.end(), of) != chain.end();
    }

    void set_room_recursive(WorldState& s, std::string const& name, std::string const& room)
    {
        s.objects.at(name).room = room;
        for (auto const& child: s.children(name))
            set_room_recursive(s, child, room);
    }

    Perturbation relocate(std::string const& object, std::string const& dest)
    {
        return { fmt::format("move {} to {}", object, dest), [object, dest](WorldState& s) {
                    auto const* o = s.find(object);
                    auto const* d = s.find(dest);
                    if (!o || !d || s.holding(object) || object == dest || o->parent == dest || is_descendant(s, dest, object))
                        return false;
                    bool const inside = d->props.container;
                    auto const room = d->room;
                    auto& moved = s.objects.at(object);
                    moved.parent = dest;
                    moved.relation = inside ? Relation::In : Relation::On;
                    set_room_recursive(s, object, room);
                    return true;
                } };
    }

    bool connected(WorldState const& s)
    {
        if (s.rooms.empty())
            return true;
        std::set<std::string> seen { s.rooms.front() };
        std::vector<std::string> stack { s.rooms.front() };
        while (!stack.empty())
        {
            auto const r = stack.back();
            stack.pop_back();
            for (auto const& other: s.rooms)
                if (!seen.contains(other) && s.adjacent(r, other))
                {
                    seen.insert(other);
                    stack.push_back(other);
                }
        }
        return seen.size() == s.rooms.size();
    }

    std::vector<Perturbation> candidates(WorldState const& base, ShiftKind kind, std::vector<std::string> const& focus)
    {
        std::vector<Perturbation> out;
        std::set<std::string> const focusSet(focus.begin(), focus.end());
        std::vector<std::string> receivers;
        for (auto const& [name, o]: base.objects)
            if (o.props.surface || o.props.container)
                receivers.push_back(name);

        switch (kind)
        {
        case ShiftKind::None:
            break;
        case ShiftKind::OL:
            for (auto const& [name, o]: base.objects)
            {
                if (!o.props.graspable)
                    continue;
                for (auto const& dest: receivers)
                {
                    auto const& d = base.at(dest);
                    if (dest == name || (o.parent && *o.parent == dest))
                        continue;
                    // closed containers and other rooms are the interesting relocations
                    if (d.room == o.room && !(d.props.openable && !d.open.value_or(false)))
                        continue;
                    auto p = relocate(name, dest);
                    p.focused = focusSet.contains(name);
                    out.push_back(std::move(p));
                }
            }
            break;
        case ShiftKind::PA:
            for (auto const& [name, o]: base.objects)
            {
                if (o.props.openable)
                    out.push_back({ fmt::format("{} starts {}", name, *o.open ? "closed" : "open"),
                                    [name](WorldState& s) {
                                        auto& obj = s.objects.at(name);
                                        obj.open = !*obj.open;
                                        return true;
                                    },
                                    focusSet.contains(name) });
                if (o.props.switchable)
                    out.push_back({ fmt::format("{} starts {}", name, *o.on ? "off" : "on"),
                                    [name](WorldState& s) {
                                        auto& obj = s.objects.at(name);
                                        obj.on = !*obj.on;
                                        return true;
                                    },
                                    focusSet.contains(name) });
                if (o.props.container && !o.props.openable)
                    out.push_back({ fmt::format("{} gains a closed lid", name),
                                    [name](WorldState& s) {
                                        auto& obj = s.objects.at(name);
                                        obj.props.openable = true;
                                        obj.open = false;
                                        return true;
                                    },
                                    focusSet.contains(name) });
            }
            break;
        case ShiftKind::RS:
            for (auto const& [a, b]: base.doors)
                out.push_back({ fmt::format("remove door {}-{}", a, b), [a, b](WorldState& s) {
                                   s.doors.erase({ a, b });
                                   return connected(s);
                               } });
            for (std::size_t i = 0; i < base.rooms.size(); ++i)
                for (std::size_t j = i + 1; j < base.rooms.size(); ++j)
                {
                    auto a = base.rooms[i];
                    auto b = base.rooms[j];
                    if (b < a)
                        std::swap(a, b);
                    if (base.doors.contains({ a, b }))
                        continue;
                    out.push_back({ fmt::format("add door {}-{}", a, b), [a, b](WorldState& s) {
                                       s.doors.emplace(a, b);
                                       return true;
                                   } });
                }
            for (auto const& [name, o]: base.objects)
            {
                if (o.parent || o.props.graspable)
                    continue;
                for (auto const& room: base.rooms)
                    if (room != o.room)
                        out.push_back({ fmt::format("move {} to {}", name, room),
                                        [name, room](WorldState& s) {
                                            set_room_recursive(s, name, room);
                                            return true;
                                        },
                                        focusSet.contains(name) });
            }
            for (auto const& [name, o]: base.objects)
            {
                if (!o.props.graspable)
                    continue;
                for (auto const& dest: receivers)
                    if (base.at(dest).room != o.room)
                    {
                        auto p = relocate(name, dest);
                        p.focused = focusSet.contains(name);
                        out.push_back(std::move(p));
                    }
            }
            break;
        }
        return out;
    }

    /// Fisher-Yates driven by raw engine output so the order is identical across standard libraries.
    template <typename T>
    void seeded_shuffle(std::vector<T>& items, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[static_cast<std::size_t>(rng() % i)]);
    }

    void relabel(WorldState& s, std::uint64_t seed, std::vector<std::string>& log)
    {
        std::mt19937_64 rng(seed ^ 0x5bd1e995ull);
        for (auto& [name, o]: s.objects)
        {
            if (o.aliases.empty())
                continue;
            auto const pick = rng() % (o.aliases.size() + 1);
            if (pick == 0)
                continue;
            o.label = o.aliases[pick - 1];
            log.push_back(fmt::format("{} looks like a {}", name, o.label));
        }
    }
} // namespace

ShiftResult apply_shift(WorldState const& base, ShiftKind kind, ShiftDegree degree, std::uint64_t seed,
                        SkillDatabase const& db, std::vector<std::string> const& focus)
{
    ShiftResult result { base, 0.0, {} };
    if (kind == ShiftKind::None || degree == ShiftDegree::None)
        return result;
    result.state.rng_seed = seed;

    auto const plans = top_level_plans(base, db);
    if (plans.plans.empty())
        throw CalibrationError("no top-level plans succeed in the base world", 0.0);

    auto pool = candidates(base, kind, focus);
    seeded_shuffle(pool, seed);
    std::stable_partition(pool.begin(), pool.end(), [](auto const& p) { return p.focused; });

    auto const band = calibration_band(degree);
    for (auto const& p: pool)
    {
        if (result.fraction >= band.target)
            break;
        auto trial = result.state;
        if (!p.apply(trial) || !check_world(trial).empty())
            continue;
        auto const f = failing_fraction(trial, plans);
        if (f > band.hi || f <= result.fraction)
            continue;
        result.state = std::move(trial);
        result.fraction = f;
        result.perturbations.push_back(p.description);
    }

    bool const admissible = degree == ShiftDegree::Large ? result.fraction >= band.lo
                                                         : result.fraction > band.lo && result.fraction <= band.hi;
    if (!admissible)
        throw CalibrationError(fmt::format("cannot calibrate a {} {} shift: achieved fraction {:.3f}", to_string(degree),
                                           to_string(kind), result.fraction),
                               result.fraction);

    if (kind == ShiftKind::RS)
        relabel(result.state, seed, result.perturbations);
    return result;
}

ShiftQuantity quantify_shift(WorldState const& base, WorldState const& shifted, SkillDatabase const& db)
{
    auto const plans = top_level_plans(base, db);
    ShiftQuantity q;
    q.total = plans.plans.size();
    q.fraction = failing_fraction(shifted, plans, &q.failing);
    q.degree = degree_for_fraction(q.fraction);
    return q;
}

} // namespace semgro
