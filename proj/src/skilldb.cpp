// SPDX-License-Identifier: Apache-2.0
#include <semgro/skilldb.hpp>

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace semgro
{

using nlohmann::json;

std::string SkillId::str() const
{
    return fmt::format("({},{})", level, index);
}

namespace
{
    std::string describe(std::vector<Violation> const& violations)
    {
        std::string text = fmt::format("database has {} violation(s)", violations.size());
        for (auto const& v: violations)
            text += fmt::format("\n  {} {}: {}", v.id.str(), v.rule, v.detail);
        return text;
    }
} // namespace

DatabaseError::DatabaseError(std::vector<Violation> violations):
    Error(describe(violations)), _violations(std::move(violations))
{
}

SkillDatabase SkillDatabase::from_entries(std::vector<SkillEntry> entries)
{
    std::sort(entries.begin(), entries.end(), [](auto const& a, auto const& b) { return a.id < b.id; });
    SkillDatabase db;
    db._entries = std::move(entries);
    for (std::size_t i = 0; i < db._entries.size(); ++i)
    {
        auto const& e = db._entries[i];
        if (!db._byId.emplace(e.id, i).second)
            throw DatabaseError({ Violation { e.id, rules::BadId, "duplicate id" } });
        db._bySemantic.try_emplace(normalize_skill_text(e.semantic), i);
        ++db._levelCounts[e.id.level];
        db._maxLevel = std::max(db._maxLevel, e.id.level);
    }
    return db;
}

std::size_t SkillDatabase::count(int level) const
{
    auto const it = _levelCounts.find(level);
    return it == _levelCounts.end() ? 0 : it->second;
}

SkillEntry const* SkillDatabase::find(SkillId id) const
{
    auto const it = _byId.find(id);
    return it == _byId.end() ? nullptr : &_entries[it->second];
}

SkillEntry const& SkillDatabase::at(SkillId id) const
{
    if (auto const* e = find(id))
        return *e;
    throw Error("unknown skill id " + id.str());
}

SkillEntry const* SkillDatabase::find_semantic(std::string_view semantic) const
{
    auto const it = _bySemantic.find(normalize_skill_text(semantic));
    return it == _bySemantic.end() ? nullptr : &_entries[it->second];
}

std::vector<std::string> SkillDatabase::plan_semantics(SkillEntry const& entry) const
{
    std::vector<std::string> out;
    out.reserve(entry.plan.size());
    for (auto const& id: entry.plan)
        if (auto const* member = find(id))
            out.push_back(member->semantic);
    return out;
}

std::vector<std::string> SkillDatabase::expand(SkillEntry const& entry) const
{
    if (entry.plan.empty())
        return { entry.semantic };
    std::vector<std::string> out;
    for (auto const& id: entry.plan)
    {
        auto const* member = find(id);
        if (!member || member->id.level >= entry.id.level)
            throw Error(fmt::format("cannot expand {}: bad plan member {}", entry.id.str(), id.str()));
        auto sub = expand(*member);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

std::vector<Violation> validate(SkillDatabase const& db)
{
    std::vector<Violation> out;
    std::unordered_map<std::string, SkillId> seen;
    for (auto const& e: db.entries())
    {
        if (e.id.level < 1 || e.id.index < 1)
            out.push_back({ e.id, rules::BadId, "level and index must be >= 1" });
        auto const key = normalize_skill_text(e.semantic);
        if (key.empty())
            out.push_back({ e.id, rules::EmptySemantic, "semantic is empty" });
        else if (auto const [it, inserted] = seen.emplace(key, e.id); !inserted)
            out.push_back({ e.id, rules::DuplicateSemantic, fmt::format("'{}' already used by {}", key, it->second.str()) });

        if (e.id.level == 1 && !e.plan.empty())
            out.push_back({ e.id, rules::PrimitiveWithPlan, "level-1 entry must have an empty plan" });
        if (e.id.level > 1 && e.plan.empty())
            out.push_back({ e.id, rules::CompositeWithoutPlan, "composite entry has an empty plan" });

        if (e.id.level == 1)
            continue; // a primitive's plan is wrong as a whole, its steps are not judged
        for (auto const& ref: e.plan)
        {
            if (!db.find(ref))
                out.push_back({ e.id, rules::DanglingReference, fmt::format("plan cites missing {}", ref.str()) });
            else if (ref.level != e.id.level - 1)
                out.push_back({ e.id, rules::LevelSkip, fmt::format("plan cites {} which is not at level {}", ref.str(), e.id.level - 1) });
        }
    }
    return out;
}

DatabaseStats stats(SkillDatabase const& db)
{
    DatabaseStats s;
    s.max_level = db.max_level();
    s.levels.resize(static_cast<std::size_t>(s.max_level));
    std::vector<std::size_t> planTotals(s.levels.size(), 0);
    for (int m = 1; m <= s.max_level; ++m)
        s.levels[static_cast<std::size_t>(m - 1)].level = m;
    for (auto const& e: db.entries())
    {
        if (e.id.level < 1)
            continue;
        auto const slot = static_cast<std::size_t>(e.id.level - 1);
        ++s.levels[slot].count;
        planTotals[slot] += e.plan.size();
    }
    for (std::size_t i = 0; i < s.levels.size(); ++i)
        if (s.levels[i].count > 0)
            s.levels[i].mean_plan_length = static_cast<double>(planTotals[i]) / static_cast<double>(s.levels[i].count);
    return s;
}

std::string render_stats(DatabaseStats const& s)
{
    std::string out = fmt::format("levels: {}\n{:>5}  {:>7}  {:>9}\n", s.max_level, "level", "entries", "mean plan");
    std::size_t total = 0;
    for (auto const& row: s.levels)
    {
        out += fmt::format("{:>5}  {:>7}  {:>9.2f}\n", row.level, row.count, row.mean_plan_length);
        total += row.count;
    }
    out += fmt::format("{:>5}  {:>7}\n", "total", total);
    return out;
}

// Persistence ----------------------------------------------------------------

std::string read_file(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(std::filesystem::path const& path, std::string_view content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

namespace
{
    template <typename Fn>
    void for_each_record(std::string_view text, Fn&& fn)
    {
        std::size_t lineNo = 0;
        for (auto const& raw: split(text, '\n'))
        {
            ++lineNo;
            auto const line = trim(raw);
            if (line.empty())
                continue;
            json record;
            try
            {
                record = json::parse(line);
            }
            catch (json::parse_error const& e)
            {
                throw ParseError(std::string("malformed record: ") + e.what(), lineNo);
            }
            if (!record.is_object())
                throw ParseError("record is not an object", lineNo);
            try
            {
                fn(record, lineNo);
            }
            catch (json::exception const& e)
            {
                throw ParseError(std::string("bad field: ") + e.what(), lineNo);
            }
        }
    }

    SkillEntry entry_from_json(json const& j)
    {
        SkillEntry e;
        e.id = { j.at("level").get<int>(), j.at("index").get<int>() };
        e.semantic = j.at("semantic").get<std::string>();
        for (auto const& name: j.at("object_names"))
            e.object_names.insert(name.get<std::string>());
        for (auto const& ref: j.at("plan"))
        {
            if (!ref.is_array() || ref.size() != 2)
                throw json::type_error::create(302, "plan member must be [level,index]", &ref);
            e.plan.push_back({ ref[0].get<int>(), ref[1].get<int>() });
        }
        return e;
    }
} // namespace

SkillDatabase parse_database(std::string_view text)
{
    std::vector<SkillEntry> entries;
    std::map<SkillId, std::size_t> lines;
    for_each_record(text, [&](json const& j, std::size_t lineNo) {
        auto entry = entry_from_json(j);
        if (auto const [it, inserted] = lines.emplace(entry.id, lineNo); !inserted)
            throw ParseError(fmt::format("duplicate id {} (first on line {})", entry.id.str(), it->second), lineNo);
        entries.push_back(std::move(entry));
    });
    auto db = SkillDatabase::from_entries(std::move(entries));
    if (auto violations = validate(db); !violations.empty())
        throw DatabaseError(std::move(violations));
    return db;
}

SkillDatabase load_database(std::filesystem::path const& path)
{
    return parse_database(read_file(path));
}

std::string serialize_database(SkillDatabase const& db)
{
    std::string out;
    for (auto const& e: db.entries())
    {
        json plan = json::array();
        for (auto const& ref: e.plan)
            plan.push_back({ ref.level, ref.index });
        json j = {
            { "level", e.id.level },
            { "index", e.id.index },
            { "semantic", e.semantic },
            { "object_names", e.object_names },
            { "plan", plan },
        };
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_database(SkillDatabase const& db, std::filesystem::path const& path)
{
    write_file(path, serialize_database(db));
}

std::vector<ObservationRecord> parse_observations(std::string_view text)
{
    std::vector<ObservationRecord> out;
    for_each_record(text, [&](json const& j, std::size_t lineNo) {
        ObservationRecord r;
        r.snapshot_id = j.at("snapshot_id").get<std::string>();
        for (auto const& n: j.at("object_names"))
            r.object_names.insert(n.get<std::string>());
        for (auto const& [name, state]: j.at("object_states").items())
        {
            if (!r.object_names.contains(name))
                throw ParseError(fmt::format("state for '{}' which is not among object_names", name), lineNo);
            r.object_states.emplace(name, state.get<std::string>());
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<ObservationRecord> load_observations(std::filesystem::path const& path)
{
    return parse_observations(read_file(path));
}

std::string serialize_observations(std::vector<ObservationRecord> const& records)
{
    std::string out;
    for (auto const& r: records)
    {
        json j = { { "snapshot_id", r.snapshot_id }, { "object_names", r.object_names }, { "object_states", r.object_states } };
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_observations(std::vector<ObservationRecord> const& records, std::filesystem::path const& path)
{
    write_file(path, serialize_observations(records));
}

} // namespace semgro
