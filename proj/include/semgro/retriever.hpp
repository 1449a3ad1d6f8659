// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/observation.hpp>
#include <semgro/skilldb.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semgro
{

/// Unit-norm real vector produced by an Embedder.
class EmbeddingVector
{
  public:
    EmbeddingVector() = default;
    /// Normalizes `components`; throws when the input has zero norm.
    explicit EmbeddingVector(std::vector<double> components);

    [[nodiscard]] std::span<double const> components() const noexcept { return _components; }
    [[nodiscard]] std::size_t dimension() const noexcept { return _components.size(); }

  private:
    std::vector<double> _components;
};

/// Dot product of two unit vectors; throws on dimension mismatch.
double cosine(EmbeddingVector const& a, EmbeddingVector const& b);

class Embedder
{
  public:
    virtual ~Embedder() = default;
    /// Throws Error on text that is empty after normalization.
    [[nodiscard]] virtual EmbeddingVector embed(std::string_view text) const = 0;
    [[nodiscard]] virtual std::size_t dimension() const = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

/// Hashed bag-of-tokens: each lower-cased alphanumeric token adds 1 to a hash bucket.
class HashEmbedder final: public Embedder
{
  public:
    explicit HashEmbedder(std::size_t dimension = 256);
    [[nodiscard]] EmbeddingVector embed(std::string_view text) const override;
    [[nodiscard]] std::size_t dimension() const override { return _dimension; }
    [[nodiscard]] std::string id() const override;
    [[nodiscard]] std::size_t bucket(std::string_view token) const;

  private:
    std::size_t _dimension;
};

struct HttpEmbedderConfig
{
    std::string base_url;     ///< e.g. http://localhost:8080
    std::string path = "/embed";
    std::size_t dimension = 0;
    int timeout_seconds = 30;
};

/// POSTs {"text": ...} and expects {"embedding": [...]} of the configured dimension.
class HttpEmbedder final: public Embedder
{
  public:
    explicit HttpEmbedder(HttpEmbedderConfig config);
    [[nodiscard]] EmbeddingVector embed(std::string_view text) const override;
    [[nodiscard]] std::size_t dimension() const override { return _config.dimension; }
    [[nodiscard]] std::string id() const override;

  private:
    HttpEmbedderConfig _config;
};

// Retrieval ------------------------------------------------------------------

struct LevelRange
{
    int lo = 1;
    int hi = 1;
    [[nodiscard]] bool contains(int level) const noexcept { return level >= lo && level <= hi; }
};

struct ScoredEntry
{
    SkillEntry const* entry = nullptr;
    double score = 0.0;
};

struct RetrievalResult
{
    std::vector<ScoredEntry> entries;
    std::string query_instruction;
    std::set<std::string> query_object_names;
};

/// Total order used to rank retrieved entries: score desc, higher level, semantic, id.
bool ranks_before(ScoredEntry const& a, ScoredEntry const& b);

/// Cosine between the two object-name sets, each serialized as sorted space-joined text.
/// Empty sets contribute 0.
double object_context_similarity(std::set<std::string> const& a, std::set<std::string> const& b, Embedder const& embedder);

/// Similarity of one entry against (instruction, observation) without any caching.
double score_entry(SkillEntry const& entry, std::string_view instruction, std::set<std::string> const& observed,
                   Embedder const& embedder);

inline constexpr std::size_t DefaultK = 10;

/// kNN retriever over an immutable database. Entry embeddings are computed once at construction.
class Retriever
{
  public:
    Retriever(SkillDatabase const& db, Embedder const& embedder);

    /// Top-k eligible entries. In strict mode an empty database (or empty eligible set) throws.
    [[nodiscard]] RetrievalResult retrieve_top_k(std::string_view instruction, std::set<std::string> const& observed,
                                                 std::size_t k = DefaultK,
                                                 std::optional<LevelRange> levels = std::nullopt,
                                                 bool strict = true) const;

    [[nodiscard]] SkillDatabase const& database() const noexcept { return _db; }
    [[nodiscard]] Embedder const& embedder() const noexcept { return _embedder; }

  private:
    SkillDatabase const& _db;
    Embedder const& _embedder;
    std::vector<EmbeddingVector> _semantic;
    std::vector<std::optional<EmbeddingVector>> _names; ///< empty when the entry has no names
};

struct InContextExample
{
    std::string semantic;
    std::vector<std::string> steps;
};

struct CandidateSets
{
    std::vector<InContextExample> examples;
    std::vector<std::string> candidates;
    std::vector<std::string> lower_candidates;
};

CandidateSets derive_candidate_sets(RetrievalResult const& result, SkillDatabase const& db);

/// Appends `text` unless an equal (normalized) item already exists.
void push_unique(std::vector<std::string>& list, std::string const& text);

} // namespace semgro
