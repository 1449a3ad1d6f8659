// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <semgro/lm.hpp>
#include <semgro/retriever.hpp>

#include <map>
#include <string>
#include <vector>

namespace semgro
{

// Prompt assets ----------------------------------------------------------------

struct PromptTemplate
{
    std::string name;
    std::string id; ///< name@<first 8 hex of the text digest>; recorded in traces
    std::string text;
};

/// Templates compiled in from assets/prompts. Names: generator, retriever, critic, chainer, summarizer.
PromptTemplate const& prompt_template(std::string_view name);

/// Replaces every {{key}}. Unknown placeholders and unused variables are errors.
std::string fill_template(std::string_view text, std::map<std::string, std::string> const& vars);

/// "1. a 2. b" ; with `open_next` the next number is appended ("1. a 2. b 3.").
std::string number_steps(std::vector<std::string> const& steps, bool open_next = false);

/// Inverse of number_steps. Tolerates a trailing open number.
std::vector<std::string> parse_numbered_steps(std::string_view text);

// Skill generator ----------------------------------------------------------------

struct ExampleBlock
{
    std::string library; ///< comma-separated skill library of the example
    std::string task;
    std::string steps; ///< numbered
};

struct PromptBundle
{
    std::string template_id;
    std::string system_preamble;
    std::vector<ExampleBlock> example_blocks;
    std::string query_block;
    double temperature = 0.0;
    int max_tokens = 64;

    /// Pure function of the fields.
    [[nodiscard]] std::string render() const;
};

/// Skills executed so far under one instruction frame.
struct ExecutionHistory
{
    std::vector<std::string> steps;
    void append(std::string semantic) { steps.push_back(std::move(semantic)); }
};

/// At most this many items in an example's own library line.
inline constexpr std::size_t ExampleLibrarySize = 15;

PromptBundle build_generator_prompt(std::string_view instruction, ExecutionHistory const& history,
                                    std::vector<InContextExample> const& examples,
                                    std::vector<std::string> const& candidates);

/// Fields recovered from a rendered generator prompt (used by scripted policies).
struct GeneratorQuery
{
    std::string instruction;
    std::vector<std::string> history;
    std::vector<std::string> candidates;
};
GeneratorQuery parse_generator_prompt(std::string_view prompt);

/// Planner reply meaning "nothing left to do under this instruction".
inline constexpr std::string_view DoneToken = "done";

class UnparseableOutputError: public LmError
{
  public:
    UnparseableOutputError(std::string const& what, std::string raw): LmError(what), _raw(std::move(raw)) {}
    [[nodiscard]] std::string const& raw() const noexcept { return _raw; }

  private:
    std::string _raw;
};

enum class MatchKind
{
    Exact,
    Normalized,
    Cosine,
    Done,
};
std::string_view to_string(MatchKind kind);

struct GeneratedSkill
{
    std::string semantic; ///< member of the candidates, or empty when done
    MatchKind match = MatchKind::Exact;
    std::string raw;
    int attempts = 1;
    [[nodiscard]] bool done() const noexcept { return match == MatchKind::Done; }
};

inline constexpr double CosineFloor = 0.8;

/// First line of the reply with numbering, quotes and trailing punctuation stripped.
std::string clean_skill_output(std::string_view raw);

/// Maps free text onto the candidates: exact, then normalized, then best cosine >= CosineFloor.
std::optional<GeneratedSkill> match_candidate(std::string_view raw, std::vector<std::string> const& candidates,
                                              Embedder const& embedder);

/// φ_G: one LM call, one retry with a format reminder, then UnparseableOutputError.
GeneratedSkill generate_skill(LmBackend& lm, PromptBundle const& prompt, std::vector<std::string> const& candidates,
                              Embedder const& embedder);

// Task retriever -------------------------------------------------------------------

struct RefinedInstruction
{
    std::string text;
    std::string parent_skill;
    std::string feedback;
    std::string template_id;
};

std::string build_refinement_prompt(std::string_view skill, std::string_view feedback,
                                    std::vector<std::string> const& lower_candidates);

struct RefinementQuery
{
    std::string skill;
    std::string feedback;
    std::vector<std::string> lower_candidates;
};
RefinementQuery parse_refinement_prompt(std::string_view prompt);

/// φ_R. Throws EmptyResponseError when the reply is blank or repeats the skill.
RefinedInstruction refine_instruction(LmBackend& lm, std::string_view skill, std::string_view feedback,
                                      std::vector<std::string> const& lower_candidates);

} // namespace semgro
