// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/lm.hpp>
#include <semgro/retriever.hpp>
#include <semgro/skilldb.hpp>
#include <semgro/worldsim.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace semgro
{

inline constexpr double DedupCosine = 0.95;

/// Chainer reply that closes an episode.
inline constexpr std::string_view ChainEndToken = "end";

/// Level-1 inventory: every action paired with every compatible object (and receptacle for put).
std::vector<SkillEntry> primitive_inventory(WorldState const& world);

struct ChainEpisode
{
    std::string start_skill;
    std::vector<std::string> steps;
    std::vector<SkillId> ids;
    bool success = false;
    std::string failure_reason;
    std::vector<std::string> observations; ///< snapshot ids, one per executed primitive
    std::set<std::string> object_names;    ///< union of the detected names over the episode
};

std::string build_chainer_prompt(std::vector<std::string> const& library, std::vector<std::string> const& steps);

struct ChainerQuery
{
    std::vector<std::string> library;
    std::vector<std::string> steps;
};
ChainerQuery parse_chainer_prompt(std::string_view prompt);

std::string build_summarizer_prompt(std::vector<std::string> const& steps);
std::vector<std::string> parse_summarizer_prompt(std::string_view prompt);

/// Rolls out one chain from the reset: a seeded initial skill of `from_level`, then LM-chosen
/// skills from those executable in the current state, until max_steps, the end token or a failure.
/// Every primitive's observation is appended to `records` when given.
ChainEpisode chain_skills(WorldState const& reset, SkillDatabase const& db, int from_level, LmBackend& lm,
                          std::size_t max_steps, std::uint64_t seed, std::vector<ObservationRecord>* records = nullptr);

/// High-level name for a successful chain. Throws EmptyResponseError on a blank reply and Error
/// when the summary just repeats one of the steps.
std::string summarize_chain(LmBackend& lm, ChainEpisode const& episode);

struct BootstrapConfig
{
    int levels = 4;                ///< M
    std::size_t budget = 200;      ///< episodes per level
    std::size_t max_steps = 4;
    std::uint64_t seed = 1;
    double dedup_cosine = DedupCosine;
};

struct LevelReport
{
    int level = 0;
    std::size_t episodes = 0;
    std::size_t failed = 0;
    std::size_t too_short = 0;
    std::size_t degenerate = 0;
    std::size_t duplicates = 0;
    std::size_t entries = 0;
};

struct BootstrapResult
{
    SkillDatabase db;
    std::vector<ObservationRecord> observations;
    std::vector<LevelReport> levels;
    std::string manifest; ///< JSON
};

class BootstrapError: public Error
{
  public:
    BootstrapError(std::string const& what, std::vector<LevelReport> levels): Error(what), _levels(std::move(levels)) {}
    [[nodiscard]] std::vector<LevelReport> const& levels() const noexcept { return _levels; }

  private:
    std::vector<LevelReport> _levels;
};

/// Bottom-up construction of levels 2..M. Throws BootstrapError when a level ends up empty.
BootstrapResult build_hierarchy(WorldState const& reset, std::vector<SkillEntry> level1, LmBackend& lm,
                                Embedder const& embedder, BootstrapConfig const& config);

/// Scripted chainer and summarizer grounded in the household's object vocabulary.
void install_bootstrap_policies(ScriptedBackend& lm, WorldState const& world);

} // namespace semgro
