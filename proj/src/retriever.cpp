// SPDX-License-Identifier: Apache-2.0
#include <semgro/retriever.hpp>

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace semgro
{

EmbeddingVector::EmbeddingVector(std::vector<double> components): _components(std::move(components))
{
    double norm = 0.0;
    for (double c: _components)
        norm += c * c;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw Error("cannot normalize a zero or non-finite embedding");
    for (double& c: _components)
        c /= norm;
}

double cosine(EmbeddingVector const& a, EmbeddingVector const& b)
{
    if (a.dimension() != b.dimension())
        throw Error(fmt::format("embedding dimension mismatch: {} vs {}", a.dimension(), b.dimension()));
    auto const x = a.components();
    auto const y = b.components();
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        dot += x[i] * y[i];
    return dot;
}

HashEmbedder::HashEmbedder(std::size_t dimension): _dimension(dimension)
{
    if (dimension == 0)
        throw ConfigError("embedding dimension must be positive");
}

std::size_t HashEmbedder::bucket(std::string_view token) const
{
    return static_cast<std::size_t>(fnv1a64(token) % _dimension);
}

EmbeddingVector HashEmbedder::embed(std::string_view text) const
{
    auto const tokens = tokenize(text);
    if (tokens.empty())
        throw Error(fmt::format("cannot embed empty text '{}'", text));
    std::vector<double> v(_dimension, 0.0);
    for (auto const& t: tokens)
        v[bucket(t)] += 1.0;
    return EmbeddingVector(std::move(v));
}

std::string HashEmbedder::id() const
{
    return fmt::format("test-hash-{}", _dimension);
}

bool ranks_before(ScoredEntry const& a, ScoredEntry const& b)
{
    if (a.score != b.score)
        return a.score > b.score;
    if (a.entry->id.level != b.entry->id.level)
        return a.entry->id.level > b.entry->id.level;
    if (a.entry->semantic != b.entry->semantic)
        return a.entry->semantic < b.entry->semantic;
    return a.entry->id < b.entry->id;
}

double object_context_similarity(std::set<std::string> const& a, std::set<std::string> const& b, Embedder const& embedder)
{
    if (a.empty() || b.empty())
        return 0.0;
    return cosine(embedder.embed(serialize_names(a)), embedder.embed(serialize_names(b)));
}

double score_entry(SkillEntry const& entry, std::string_view instruction, std::set<std::string> const& observed,
                   Embedder const& embedder)
{
    return cosine(embedder.embed(instruction), embedder.embed(entry.semantic))
           + object_context_similarity(entry.object_names, observed, embedder);
}

Retriever::Retriever(SkillDatabase const& db, Embedder const& embedder): _db(db), _embedder(embedder)
{
    _semantic.reserve(db.size());
    _names.reserve(db.size());
    for (auto const& e: db.entries())
    {
        _semantic.push_back(embedder.embed(e.semantic));
        if (e.object_names.empty())
            _names.emplace_back(std::nullopt);
        else
            _names.emplace_back(embedder.embed(serialize_names(e.object_names)));
    }
}

RetrievalResult Retriever::retrieve_top_k(std::string_view instruction, std::set<std::string> const& observed,
                                          std::size_t k, std::optional<LevelRange> levels, bool strict) const
{
    if (k == 0)
        throw ConfigError("k must be at least 1");

    RetrievalResult result;
    result.query_instruction = std::string(instruction);
    result.query_object_names = observed;

    auto const query = _embedder.embed(instruction);
    std::optional<EmbeddingVector> context;
    if (!observed.empty())
        context = _embedder.embed(serialize_names(observed));

    std::vector<ScoredEntry> scored;
    scored.reserve(_db.size());
    auto const& entries = _db.entries();
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
        if (levels && !levels->contains(entries[i].id.level))
            continue;
        double s = cosine(query, _semantic[i]);
        if (context && _names[i])
            s += cosine(*context, *_names[i]);
        scored.push_back({ &entries[i], s });
    }

    if (scored.empty())
    {
        if (strict)
            throw Error(_db.empty() ? "retrieval from an empty skill database"
                                    : "no skill entries at the requested abstraction levels");
        return result;
    }

    auto const n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), ranks_before);
    scored.resize(n);
    result.entries = std::move(scored);
    return result;
}

void push_unique(std::vector<std::string>& list, std::string const& text)
{
    auto const key = normalize_skill_text(text);
    for (auto const& existing: list)
        if (normalize_skill_text(existing) == key)
            return;
    list.push_back(text);
}

CandidateSets derive_candidate_sets(RetrievalResult const& result, SkillDatabase const& db)
{
    CandidateSets sets;
    for (auto const& scored: result.entries)
    {
        auto const& entry = *scored.entry;
        auto const steps = db.plan_semantics(entry);
        sets.examples.push_back({ entry.semantic, steps });
        if (entry.id.level == 1)
            push_unique(sets.candidates, entry.semantic);
        for (auto const& s: steps)
            push_unique(sets.candidates, s);
        for (auto const& ref: entry.plan)
            if (auto const* member = db.find(ref))
                for (auto const& lower: db.plan_semantics(*member))
                    push_unique(sets.lower_candidates, lower);
    }
    return sets;
}

} // namespace semgro
