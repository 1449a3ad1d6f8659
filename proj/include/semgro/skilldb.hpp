// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/common.hpp>

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace semgro
{

/// Position of a skill in the hierarchy: level m (1 = primitive) and index n within the level.
struct SkillId
{
    int level = 0;
    int index = 0;

    auto operator<=>(SkillId const&) const = default;
    [[nodiscard]] std::string str() const;
};

/// One node of the hierarchical skill database.
struct SkillEntry
{
    SkillId id;
    std::string semantic;
    std::set<std::string> object_names;
    std::vector<SkillId> plan; ///< one-step lower plan; empty for level 1

    bool operator==(SkillEntry const&) const = default;
};

/// A single invariant violation. `rule` is one of the names in `rules::`.
struct Violation
{
    SkillId id;
    std::string rule;
    std::string detail;
};

namespace rules
{
    inline constexpr auto EmptySemantic = "empty-semantic";
    inline constexpr auto BadId = "bad-id";
    inline constexpr auto PrimitiveWithPlan = "primitive-with-plan";
    inline constexpr auto CompositeWithoutPlan = "composite-without-plan";
    inline constexpr auto DanglingReference = "dangling-reference";
    inline constexpr auto LevelSkip = "level-skip";
    inline constexpr auto DuplicateSemantic = "duplicate-semantic";
} // namespace rules

/// Raised when a loaded database violates the structural invariants.
class DatabaseError: public Error
{
  public:
    explicit DatabaseError(std::vector<Violation> violations);
    [[nodiscard]] std::vector<Violation> const& violations() const noexcept { return _violations; }

  private:
    std::vector<Violation> _violations;
};

/// Immutable collection of skill entries indexed by id and by normalized semantic.
class SkillDatabase
{
  public:
    SkillDatabase() = default;

    /// Builds a database without validating it. Duplicate ids throw.
    static SkillDatabase from_entries(std::vector<SkillEntry> entries);

    [[nodiscard]] int max_level() const noexcept { return _maxLevel; }
    [[nodiscard]] std::size_t size() const noexcept { return _entries.size(); }
    [[nodiscard]] bool empty() const noexcept { return _entries.empty(); }
    [[nodiscard]] std::size_t count(int level) const;

    /// All entries ordered by id.
    [[nodiscard]] std::vector<SkillEntry> const& entries() const noexcept { return _entries; }
    [[nodiscard]] SkillEntry const* find(SkillId id) const;
    [[nodiscard]] SkillEntry const& at(SkillId id) const;
    /// Case/whitespace-insensitive lookup.
    [[nodiscard]] SkillEntry const* find_semantic(std::string_view semantic) const;

    /// Semantics of the one-step lower plan.
    [[nodiscard]] std::vector<std::string> plan_semantics(SkillEntry const& entry) const;

    /// Recursive expansion down to level-1 semantics. Level-1 entries expand to themselves.
    [[nodiscard]] std::vector<std::string> expand(SkillEntry const& entry) const;

    bool operator==(SkillDatabase const& other) const { return _entries == other._entries; }

  private:
    std::vector<SkillEntry> _entries;
    std::map<SkillId, std::size_t> _byId;
    std::unordered_map<std::string, std::size_t> _bySemantic;
    std::map<int, std::size_t> _levelCounts;
    int _maxLevel = 0;
};

/// Checks every entry and database invariant; pure.
std::vector<Violation> validate(SkillDatabase const& db);

struct LevelStats
{
    int level = 0;
    std::size_t count = 0;
    double mean_plan_length = 0.0;
};

struct DatabaseStats
{
    int max_level = 0;
    std::vector<LevelStats> levels; ///< one row per level 1..max_level
};

DatabaseStats stats(SkillDatabase const& db);
std::string render_stats(DatabaseStats const& s);

// Persistence ----------------------------------------------------------------

SkillDatabase parse_database(std::string_view text);
SkillDatabase load_database(std::filesystem::path const& path);
std::string serialize_database(SkillDatabase const& db);
void save_database(SkillDatabase const& db, std::filesystem::path const& path);

/// One perception snapshot captured while building the hierarchy.
struct ObservationRecord
{
    std::string snapshot_id;
    std::set<std::string> object_names;
    std::map<std::string, std::string> object_states;

    bool operator==(ObservationRecord const&) const = default;
};

std::vector<ObservationRecord> parse_observations(std::string_view text);
std::vector<ObservationRecord> load_observations(std::filesystem::path const& path);
std::string serialize_observations(std::vector<ObservationRecord> const& records);
void save_observations(std::vector<ObservationRecord> const& records, std::filesystem::path const& path);

std::string read_file(std::filesystem::path const& path);
void write_file(std::filesystem::path const& path, std::string_view content);

} // namespace semgro
