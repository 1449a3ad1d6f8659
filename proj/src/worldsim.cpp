// SPDX-License-Identifier: Apache-2.0
#include <semgro/worldsim.hpp>

#include <algorithm>
#include <deque>

#include <fmt/format.h>
#include <json.hpp>

namespace semgro
{

using nlohmann::json;

namespace
{
    constexpr std::array<std::pair<Action, std::string_view>, 9> ActionNames { {
        { Action::Find, "find" },
        { Action::Grab, "grab" },
        { Action::Walk, "walk" },
        { Action::Sit, "sit" },
        { Action::Put, "put" },
        { Action::Open, "open" },
        { Action::Close, "close" },
        { Action::SwitchOn, "switchon" },
        { Action::SwitchOff, "switchoff" },
    } };

    bool is_filler(std::string_view word)
    {
        return word == "to" || word == "the" || word == "in" || word == "on" || word == "into" || word == "a"
               || word == "an" || word == "onto";
    }
} // namespace

std::string_view to_string(Action action)
{
    for (auto const& [a, name]: ActionNames)
        if (a == action)
            return name;
    return "?";
}

std::optional<Action> parse_action(std::string_view word)
{
    for (auto const& [a, name]: ActionNames)
        if (name == word)
            return a;
    return std::nullopt;
}

std::string SkillPrimitive::str() const
{
    if (target)
        return fmt::format("{} {} {}", to_string(action), object, *target);
    return fmt::format("{} {}", to_string(action), object);
}

std::optional<SkillPrimitive> parse_primitive(std::string_view text)
{
    auto tokens = tokenize(text);
    if (tokens.empty())
        return std::nullopt;
    auto const action = parse_action(tokens.front());
    if (!action)
        return std::nullopt;
    std::vector<std::string> args;
    for (std::size_t i = 1; i < tokens.size(); ++i)
        if (!is_filler(tokens[i]))
            args.push_back(tokens[i]);
    std::size_t const expected = *action == Action::Put ? 2 : 1;
    if (args.size() != expected)
        return std::nullopt;
    SkillPrimitive p { *action, args[0], std::nullopt };
    if (expected == 2)
        p.target = args[1];
    return p;
}

// WorldState queries ---------------------------------------------------------

WorldObject const* WorldState::find(std::string_view name) const
{
    auto const it = objects.find(std::string(name));
    return it == objects.end() ? nullptr : &it->second;
}

WorldObject const& WorldState::at(std::string_view name) const
{
    if (auto const* o = find(name))
        return *o;
    throw Error(fmt::format("unknown object '{}'", name));
}

bool WorldState::adjacent(std::string const& a, std::string const& b) const
{
    return doors.contains(a < b ? std::pair { a, b } : std::pair { b, a });
}

bool WorldState::holding(std::string const& name) const
{
    return std::find(agent.holding.begin(), agent.holding.end(), name) != agent.holding.end();
}

std::optional<std::string> WorldState::hidden_by(std::string const& name) const
{
    auto const* current = find(name);
    std::size_t guard = 0;
    while (current && current->parent && guard++ < objects.size())
    {
        auto const* parent = find(*current->parent);
        if (!parent)
            break;
        if (current->relation == Relation::In && parent->props.openable && !parent->open.value_or(false))
            return parent->name;
        current = parent;
    }
    return std::nullopt;
}

bool WorldState::visible(std::string const& name) const
{
    if (holding(name))
        return true;
    auto const* o = find(name);
    return o && o->room == agent.room && !hidden_by(name);
}

std::vector<std::string> WorldState::ancestors(std::string const& name) const
{
    std::vector<std::string> out;
    auto const* current = find(name);
    while (current && current->parent && out.size() < objects.size())
    {
        out.push_back(*current->parent);
        current = find(*current->parent);
    }
    return out;
}

std::vector<std::string> WorldState::children(std::string const& name) const
{
    std::vector<std::string> out;
    for (auto const& [n, o]: objects)
        if (o.parent && *o.parent == name)
            out.push_back(n);
    return out;
}

WorldObject const* WorldState::find_by_label(std::string_view label) const
{
    auto const key = normalize_text(label);
    for (auto const& [n, o]: objects)
        if (normalize_text(o.label) == key)
            return &o;
    return find(key);
}

std::vector<std::string> check_world(WorldState const& s)
{
    std::vector<std::string> problems;
    std::set<std::string> const rooms(s.rooms.begin(), s.rooms.end());
    if (!rooms.contains(s.agent.room))
        problems.push_back(fmt::format("agent room '{}' is not a room", s.agent.room));
    for (auto const& [a, b]: s.doors)
        if (!rooms.contains(a) || !rooms.contains(b))
            problems.push_back(fmt::format("door {}-{} references an unknown room", a, b));
    if (s.agent.holding.size() > HandCapacity)
        problems.push_back("agent holds more than two objects");
    for (auto const& [name, o]: s.objects)
    {
        if (o.props.openable != o.open.has_value())
            problems.push_back(fmt::format("'{}': open state must be present iff openable", name));
        if (o.props.switchable != o.on.has_value())
            problems.push_back(fmt::format("'{}': on state must be present iff switchable", name));
        if (s.holding(name))
        {
            if (!o.room.empty() || o.parent)
                problems.push_back(fmt::format("held '{}' must have no room or parent", name));
            continue;
        }
        if (!rooms.contains(o.room))
            problems.push_back(fmt::format("'{}' is in unknown room '{}'", name, o.room));
        if (o.parent)
        {
            auto const* p = s.find(*o.parent);
            if (!p)
                problems.push_back(fmt::format("'{}' has unknown parent '{}'", name, *o.parent));
            else if (p->room != o.room)
                problems.push_back(fmt::format("'{}' is not in the room of its parent '{}'", name, *o.parent));
            if (s.ancestors(name).size() >= s.objects.size())
                problems.push_back(fmt::format("containment cycle through '{}'", name));
        }
    }
    for (auto const& h: s.agent.holding)
        if (!s.find(h))
            problems.push_back(fmt::format("agent holds unknown '{}'", h));
    for (auto const& n: s.agent.near)
        if (!s.find(n))
            problems.push_back(fmt::format("near-set names unknown '{}'", n));
    if (s.agent.sitting_on && !s.find(*s.agent.sitting_on))
        problems.push_back("agent sits on an unknown object");
    return problems;
}

// Serialization --------------------------------------------------------------

namespace
{
    std::vector<std::string> props_list(ObjectProps const& p)
    {
        std::vector<std::string> out;
        if (p.openable)
            out.emplace_back("openable");
        if (p.switchable)
            out.emplace_back("switchable");
        if (p.graspable)
            out.emplace_back("graspable");
        if (p.surface)
            out.emplace_back("surface");
        if (p.container)
            out.emplace_back("container");
        if (p.sittable)
            out.emplace_back("sittable");
        return out;
    }

    ObjectProps props_from(json const& list)
    {
        ObjectProps p;
        for (auto const& item: list)
        {
            auto const name = item.get<std::string>();
            if (name == "openable")
                p.openable = true;
            else if (name == "switchable")
                p.switchable = true;
            else if (name == "graspable")
                p.graspable = true;
            else if (name == "surface")
                p.surface = true;
            else if (name == "container")
                p.container = true;
            else if (name == "sittable")
                p.sittable = true;
            else
                throw ParseError(fmt::format("unknown property '{}'", name));
        }
        return p;
    }

    json world_to_json(WorldState const& s)
    {
        json doors = json::array();
        for (auto const& [a, b]: s.doors)
            doors.push_back({ a, b });
        json objects = json::array();
        for (auto const& [name, o]: s.objects)
        {
            json j = {
                { "name", o.name },
                { "label", o.label },
                { "class", o.cls },
                { "room", o.room },
                { "props", props_list(o.props) },
            };
            if (o.parent)
            {
                j["parent"] = *o.parent;
                j["relation"] = o.relation == Relation::In ? "in" : "on";
            }
            if (o.open)
                j["open"] = *o.open;
            if (o.on)
                j["on"] = *o.on;
            if (!o.aliases.empty())
                j["aliases"] = o.aliases;
            objects.push_back(std::move(j));
        }
        json agent = { { "room", s.agent.room }, { "near", s.agent.near }, { "holding", s.agent.holding } };
        agent["sitting_on"] = s.agent.sitting_on ? json(*s.agent.sitting_on) : json(nullptr);
        return {
            { "world", s.world_id },   { "rooms", s.rooms },           { "doors", doors },
            { "agent", agent },        { "objects", objects },        { "step_count", s.step_count },
            { "seed", s.rng_seed },
        };
    }
} // namespace

WorldState parse_world(std::string_view text)
{
    json j;
    try
    {
        j = json::parse(text);
    }
    catch (json::parse_error const& e)
    {
        throw ParseError(std::string("malformed world: ") + e.what());
    }
    WorldState s;
    try
    {
        s.world_id = j.at("world").get<std::string>();
        s.rooms = j.at("rooms").get<std::vector<std::string>>();
        for (auto const& d: j.value("doors", json::array()))
        {
            auto a = d.at(0).get<std::string>();
            auto b = d.at(1).get<std::string>();
            if (b < a)
                std::swap(a, b);
            s.doors.emplace(a, b);
        }
        auto const& agent = j.at("agent");
        s.agent.room = agent.at("room").get<std::string>();
        if (agent.contains("near"))
            s.agent.near = agent["near"].get<std::set<std::string>>();
        if (agent.contains("holding"))
            s.agent.holding = agent["holding"].get<std::vector<std::string>>();
        if (agent.contains("sitting_on") && !agent["sitting_on"].is_null())
            s.agent.sitting_on = agent["sitting_on"].get<std::string>();
        s.step_count = j.value("step_count", std::uint64_t { 0 });
        s.rng_seed = j.value("seed", std::uint64_t { 0 });

        for (auto const& item: j.at("objects"))
        {
            WorldObject o;
            o.name = item.at("name").get<std::string>();
            o.label = item.value("label", o.name);
            o.cls = item.value("class", o.name);
            o.room = item.value("room", std::string {});
            if (item.contains("parent"))
            {
                o.parent = item["parent"].get<std::string>();
                auto const rel = item.value("relation", std::string("on"));
                if (rel != "in" && rel != "on")
                    throw ParseError(fmt::format("'{}': relation must be in or on", o.name));
                o.relation = rel == "in" ? Relation::In : Relation::On;
            }
            o.props = props_from(item.value("props", json::array()));
            if (o.props.openable)
                o.open = item.value("open", false);
            if (o.props.switchable)
                o.on = item.value("on", false);
            o.aliases = item.value("aliases", std::vector<std::string> {});
            auto const name = o.name;
            if (!s.objects.emplace(name, std::move(o)).second)
                throw ParseError(fmt::format("duplicate object '{}'", name));
        }
    }
    catch (json::exception const& e)
    {
        throw ParseError(std::string("bad world field: ") + e.what());
    }

    // rooms of nested objects follow their parents
    for (std::size_t pass = 0; pass < s.objects.size(); ++pass)
    {
        bool changed = false;
        for (auto& [name, o]: s.objects)
            if (o.room.empty() && o.parent && !s.holding(name))
                if (auto const* p = s.find(*o.parent); p && !p->room.empty())
                {
                    o.room = p->room;
                    changed = true;
                }
        if (!changed)
            break;
    }

    if (auto const problems = check_world(s); !problems.empty())
        throw ParseError("invalid world: " + join(problems, "; "));
    return s;
}

WorldState load_world(std::filesystem::path const& path)
{
    return parse_world(read_file(path));
}

std::string serialize_world(WorldState const& state)
{
    return world_to_json(state).dump(1);
}

std::string state_hash(WorldState const& state)
{
    return sha256_hex(world_to_json(state).dump());
}

// Observation ----------------------------------------------------------------

std::string format_state(std::string const& label, std::string const& state)
{
    return fmt::format("{} is {}", label, state);
}

Observation observe(WorldState const& state)
{
    Observation obs;
    obs.room = state.agent.room;
    obs.snapshot_id = fmt::format("{}@{}", state.world_id, state_hash(state).substr(0, 12));
    for (auto const& [name, o]: state.objects)
    {
        if (!state.visible(name))
            continue;
        obs.object_names.insert(o.label);
        if (o.open)
            obs.object_states[o.label] = *o.open ? "OPEN" : "CLOSED";
        else if (o.on)
            obs.object_states[o.label] = *o.on ? "ON" : "OFF";
    }
    return obs;
}

std::string render_states(Observation const& obs)
{
    std::vector<std::string> parts;
    for (auto const& [label, st]: obs.object_states)
        parts.push_back(format_state(label, st));
    return join(parts, ", ");
}

// Primitive execution --------------------------------------------------------

namespace
{
    StepOutcome fail(std::string reason)
    {
        return { false, std::move(reason) };
    }

    std::string const& label_of(WorldState const& s, std::string const& name)
    {
        return s.at(name).label;
    }

    /// Next room on a shortest door path from `from` to `to`, if any.
    std::optional<std::string> next_room(WorldState const& s, std::string const& from, std::string const& to)
    {
        std::map<std::string, std::string> previous;
        std::deque<std::string> queue { from };
        previous[from] = from;
        while (!queue.empty())
        {
            auto const room = queue.front();
            queue.pop_front();
            if (room == to)
                break;
            for (auto const& r: s.rooms)
                if (!previous.contains(r) && s.adjacent(room, r))
                {
                    previous[r] = room;
                    queue.push_back(r);
                }
        }
        if (!previous.contains(to))
            return std::nullopt;
        auto room = to;
        while (previous[room] != from)
            room = previous[room];
        return room;
    }

    /// A top-level, visible-once-there object in `room` used as a walking waypoint.
    std::optional<std::string> waypoint(WorldState const& s, std::string const& room)
    {
        for (auto const& [name, o]: s.objects)
            if (o.room == room && !o.parent && !o.props.graspable)
                return name;
        return std::nullopt;
    }

    /// Shared reachability check for manipulation: object in the current room and not hidden.
    std::optional<std::string> presence_problem(WorldState const& s, WorldObject const& o)
    {
        if (s.holding(o.name))
            return std::nullopt;
        if (o.room != s.agent.room)
            return fmt::format("you cannot see the {0}, you need to walk to the {0}", o.label);
        if (auto const c = s.hidden_by(o.name))
            return fmt::format("{0} is inside the closed {1}, you need to open the {1}", o.label, label_of(s, *c));
        return std::nullopt;
    }

    std::optional<std::string> near_problem(WorldState const& s, WorldObject const& o)
    {
        if (auto p = presence_problem(s, o))
            return p;
        if (!s.holding(o.name) && !s.agent.near.contains(o.name))
            return fmt::format("you are not near the {0}, you need to walk to the {0}", o.label);
        return std::nullopt;
    }

    void collect_visible_descendants(WorldState const& s, std::string const& name, std::set<std::string>& out)
    {
        for (auto const& child: s.children(name))
            if (!s.hidden_by(child))
            {
                out.insert(child);
                collect_visible_descendants(s, child, out);
            }
    }

    WorldObject& mut(WorldState& s, std::string const& name)
    {
        return s.objects.at(name);
    }
} // namespace

StepOutcome apply(WorldState& s, SkillPrimitive const& p)
{
    auto const* target = s.find(p.object);
    if (!target)
        return fail(fmt::format("there is no {} in this house", p.object));
    auto const& o = *target;

    switch (p.action)
    {
    case Action::Walk:
    {
        if (s.holding(o.name))
            return fail(fmt::format("you are holding the {0}, you do not need to walk to the {0}", o.label));
        if (o.room != s.agent.room && !s.adjacent(o.room, s.agent.room))
        {
            auto const via = next_room(s, s.agent.room, o.room);
            auto const stop = via ? waypoint(s, *via) : std::nullopt;
            if (!stop)
                return fail(fmt::format("the {} is not reachable from here", o.label));
            return fail(fmt::format("the {} is not reachable from here, you need to walk to the {}", o.label,
                                    label_of(s, *stop)));
        }
        if (auto const c = s.hidden_by(o.name))
            return fail(fmt::format("{0} is inside the closed {1}, you need to open the {1}", o.label, label_of(s, *c)));
        std::set<std::string> near { o.name };
        for (auto const& a: s.ancestors(o.name))
            near.insert(a);
        collect_visible_descendants(s, o.name, near);
        s.agent.room = o.room;
        s.agent.near = std::move(near);
        s.agent.sitting_on.reset();
        break;
    }
    case Action::Find:
    {
        if (auto problem = presence_problem(s, o))
            return fail(std::move(*problem));
        s.agent.near.insert(o.name);
        for (auto const& a: s.ancestors(o.name))
            s.agent.near.insert(a);
        break;
    }
    case Action::Grab:
    {
        if (!o.props.graspable)
            return fail(fmt::format("the {} cannot be grabbed", o.label));
        if (s.holding(o.name))
            return fail(fmt::format("you are already holding the {0}, you do not need to grab the {0}", o.label));
        if (auto problem = near_problem(s, o))
            return fail(std::move(*problem));
        if (s.agent.holding.size() >= HandCapacity)
            return fail("your hands are full, you need to put down an object");
        auto const name = o.name;
        s.agent.holding.push_back(name);
        auto& held = mut(s, name);
        held.room.clear();
        held.parent.reset();
        break;
    }
    case Action::Open:
    case Action::Close:
    {
        bool const opening = p.action == Action::Open;
        auto const verb = to_string(p.action);
        if (!o.props.openable)
            return fail(fmt::format("the {} cannot be {}", o.label, opening ? "opened" : "closed"));
        if (auto problem = near_problem(s, o))
            return fail(std::move(*problem));
        if (*o.open == opening)
            return fail(fmt::format("the {0} is already {1}, you do not need to {2} the {0}", o.label,
                                    opening ? "open" : "closed", verb));
        mut(s, o.name).open = opening;
        if (!opening)
        {
            // contents of a closed container drop out of reach
            std::set<std::string> hiddenNow;
            for (auto const& n: s.agent.near)
                if (s.hidden_by(n))
                    hiddenNow.insert(n);
            for (auto const& n: hiddenNow)
                s.agent.near.erase(n);
        }
        else
        {
            collect_visible_descendants(s, o.name, s.agent.near);
        }
        break;
    }
    case Action::SwitchOn:
    case Action::SwitchOff:
    {
        bool const on = p.action == Action::SwitchOn;
        if (!o.props.switchable)
            return fail(fmt::format("the {} cannot be switched {}", o.label, on ? "on" : "off"));
        if (auto problem = near_problem(s, o))
            return fail(std::move(*problem));
        if (*o.on == on)
            return fail(fmt::format("the {0} is already {1}, you do not need to {2} the {0}", o.label, on ? "on" : "off",
                                    to_string(p.action)));
        mut(s, o.name).on = on;
        break;
    }
    case Action::Sit:
    {
        if (!o.props.sittable)
            return fail(fmt::format("the {} cannot be sat on", o.label));
        if (s.agent.sitting_on == o.name)
            return fail(fmt::format("you are already sitting on the {0}, you do not need to sit the {0}", o.label));
        if (auto problem = near_problem(s, o))
            return fail(std::move(*problem));
        s.agent.sitting_on = o.name;
        break;
    }
    case Action::Put:
    {
        if (!p.target)
            return fail("put needs a target");
        if (!s.holding(o.name))
            return fail(fmt::format("you are not holding the {0}, you need to grab the {0}", o.label));
        auto const* dest = s.find(*p.target);
        if (!dest)
            return fail(fmt::format("there is no {} in this house", *p.target));
        if (dest->name == o.name || s.holding(dest->name))
            return fail(fmt::format("the {} cannot be placed there", o.label));
        if (!dest->props.surface && !dest->props.container)
            return fail(fmt::format("the {} cannot hold objects", dest->label));
        if (auto problem = near_problem(s, *dest))
            return fail(std::move(*problem));
        if (dest->props.container && dest->props.openable && !*dest->open)
            return fail(fmt::format("{0} is closed, you need to open the {0}", dest->label));
        auto const name = o.name;
        auto const destName = dest->name;
        auto const destRoom = dest->room;
        bool const inside = dest->props.container;
        std::erase(s.agent.holding, name);
        auto& placed = mut(s, name);
        placed.parent = destName;
        placed.relation = inside ? Relation::In : Relation::On;
        placed.room = destRoom;
        s.agent.near.insert(name);
        break;
    }
    }
    ++s.step_count;
    return { true, {} };
}

StepResult step(WorldState const& state, SkillPrimitive const& primitive)
{
    StepResult r { state, {}, false, std::nullopt };
    auto const outcome = apply(r.state, primitive);
    r.success = outcome.success;
    if (!outcome.success)
        r.failure_reason = outcome.failure_reason;
    r.observation = observe(r.state);
    return r;
}

std::vector<SkillPrimitive> resolve_primitives(SkillDatabase const& db, std::string_view semantic)
{
    if (auto const* entry = db.find_semantic(semantic))
    {
        std::vector<SkillPrimitive> out;
        for (auto const& text: db.expand(*entry))
        {
            auto p = parse_primitive(text);
            if (!p)
                throw Error(fmt::format("primitive '{}' in the expansion of '{}' does not parse", text, semantic));
            out.push_back(std::move(*p));
        }
        return out;
    }
    if (auto p = parse_primitive(semantic))
        return { std::move(*p) };
    throw Error(fmt::format("unknown skill '{}'", semantic));
}

CompositeResult run_primitives(WorldState& state, std::vector<SkillPrimitive> const& primitives)
{
    CompositeResult r;
    for (auto const& p: primitives)
    {
        auto const outcome = apply(state, p);
        if (!outcome.success)
        {
            r.failed_primitive = p;
            r.failure_reason = outcome.failure_reason;
            return r;
        }
        r.executed.push_back(p);
    }
    r.success = true;
    return r;
}

CompositeResult execute_composite(WorldState& state, SkillDatabase const& db, std::string_view semantic)
{
    return run_primitives(state, resolve_primitives(db, semantic));
}

CompositeResult dry_run(WorldState const& state, std::vector<SkillPrimitive> const& primitives)
{
    auto copy = state;
    return run_primitives(copy, primitives);
}

// Goals ----------------------------------------------------------------------

std::string GoalCondition::str() const
{
    switch (kind)
    {
    case GoalKind::In:
        return fmt::format("in({},{})", a, b);
    case GoalKind::On:
        return fmt::format("on({},{})", a, b);
    case GoalKind::State:
        return fmt::format("state({},{})", a, b);
    case GoalKind::Sitting:
        return fmt::format("sitting({})", a);
    case GoalKind::Holding:
        return fmt::format("holding({})", a);
    }
    return {};
}

GoalCondition parse_goal(std::string_view text)
{
    auto const t = normalize_text(text);
    auto const open = t.find('(');
    if (open == std::string::npos || t.empty() || t.back() != ')')
        throw ParseError(fmt::format("malformed goal '{}'", text));
    auto const head = trim(t.substr(0, open));
    auto args = split(t.substr(open + 1, t.size() - open - 2), ',');
    for (auto& a: args)
        a = trim(a);
    auto need = [&](std::size_t n) {
        if (args.size() != n || std::any_of(args.begin(), args.end(), [](auto const& a) { return a.empty(); }))
            throw ParseError(fmt::format("goal '{}' needs {} argument(s)", text, n));
    };
    GoalCondition g;
    if (head == "in" || head == "on")
    {
        need(2);
        g = { head == "in" ? GoalKind::In : GoalKind::On, args[0], args[1] };
    }
    else if (head == "state")
    {
        need(2);
        auto st = args[1];
        std::transform(st.begin(), st.end(), st.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        if (st != "OPEN" && st != "CLOSED" && st != "ON" && st != "OFF")
            throw ParseError(fmt::format("goal '{}' has unknown state", text));
        g = { GoalKind::State, args[0], st };
    }
    else if (head == "sitting" || head == "holding")
    {
        need(1);
        g = { head == "sitting" ? GoalKind::Sitting : GoalKind::Holding, args[0], {} };
    }
    else
        throw ParseError(fmt::format("unknown goal predicate '{}'", head));
    return g;
}

bool holds(WorldState const& s, GoalCondition const& g)
{
    auto const* o = s.find(g.a);
    if (!o)
        return false;
    switch (g.kind)
    {
    case GoalKind::In:
        return o->parent == g.b && o->relation == Relation::In;
    case GoalKind::On:
        return o->parent == g.b && o->relation == Relation::On;
    case GoalKind::State:
        if (g.b == "OPEN" || g.b == "CLOSED")
            return o->open && *o->open == (g.b == "OPEN");
        return o->on && *o->on == (g.b == "ON");
    case GoalKind::Sitting:
        return s.agent.sitting_on == g.a;
    case GoalKind::Holding:
        return s.holding(g.a);
    }
    return false;
}

std::size_t goals_met(WorldState const& state, std::vector<GoalCondition> const& goals)
{
    return static_cast<std::size_t>(std::count_if(goals.begin(), goals.end(), [&](auto const& g) { return holds(state, g); }));
}

std::string_view to_string(InstructionType type)
{
    switch (type)
    {
    case InstructionType::AbstractNoun:
        return "AbstractNoun";
    case InstructionType::AbstractVerb:
        return "AbstractVerb";
    case InstructionType::Structured:
        return "Structured";
    case InstructionType::LongHorizon:
        return "LongHorizon";
    }
    return "?";
}

InstructionType parse_instruction_type(std::string_view text)
{
    for (auto t: { InstructionType::AbstractNoun, InstructionType::AbstractVerb, InstructionType::Structured,
                   InstructionType::LongHorizon })
        if (to_string(t) == text)
            return t;
    throw ParseError(fmt::format("unknown instruction type '{}'", text));
}

std::vector<TaskSpec> parse_tasks(std::string_view text)
{
    json j;
    try
    {
        j = json::parse(text);
    }
    catch (json::parse_error const& e)
    {
        throw ParseError(std::string("malformed tasks: ") + e.what());
    }
    std::vector<TaskSpec> tasks;
    try
    {
        for (auto const& item: j.at("tasks"))
        {
            TaskSpec t;
            t.name = item.at("name").get<std::string>();
            for (auto const& g: item.at("goals"))
                t.goals.push_back(parse_goal(g.get<std::string>()));
            for (auto const& p: item.at("ground_truth"))
            {
                auto prim = parse_primitive(p.get<std::string>());
                if (!prim)
                    throw ParseError(fmt::format("task '{}': bad primitive '{}'", t.name, p.get<std::string>()));
                t.ground_truth.push_back(std::move(*prim));
            }
            t.step_budget = item.value("step_budget", std::size_t { 60 });
            auto const instructions = item.value("instructions", json::object());
            for (auto const& [type, instruction]: instructions.items())
                t.instructions[parse_instruction_type(type)] = instruction.get<std::string>();
            if (t.goals.empty())
                throw ParseError(fmt::format("task '{}' has no goal conditions", t.name));
            tasks.push_back(std::move(t));
        }
    }
    catch (json::exception const& e)
    {
        throw ParseError(std::string("bad task field: ") + e.what());
    }
    return tasks;
}

std::vector<TaskSpec> load_tasks(std::filesystem::path const& path)
{
    return parse_tasks(read_file(path));
}

std::string serialize_tasks(std::vector<TaskSpec> const& tasks)
{
    json list = json::array();
    for (auto const& t: tasks)
    {
        json goals = json::array();
        for (auto const& g: t.goals)
            goals.push_back(g.str());
        json gt = json::array();
        for (auto const& p: t.ground_truth)
            gt.push_back(p.str());
        json instructions = json::object();
        for (auto const& [type, text]: t.instructions)
            instructions[std::string(to_string(type))] = text;
        list.push_back({ { "name", t.name },
                         { "goals", goals },
                         { "ground_truth", gt },
                         { "step_budget", t.step_budget },
                         { "instructions", instructions } });
    }
    return json { { "tasks", list } }.dump(1) + "\n";
}

} // namespace semgro
