// SPDX-License-Identifier: Apache-2.0
#include <semgro/planner.hpp>

#include <algorithm>
#include <regex>

#include <fmt/format.h>

namespace semgro
{

namespace detail
{
    std::vector<std::pair<std::string_view, std::string_view>> const& prompt_assets();
}

// Templates ------------------------------------------------------------------

PromptTemplate const& prompt_template(std::string_view name)
{
    static std::map<std::string, PromptTemplate, std::less<>> const templates = [] {
        std::map<std::string, PromptTemplate, std::less<>> out;
        for (auto const& [n, text]: detail::prompt_assets())
        {
            std::string body(text);
            while (!body.empty() && (body.back() == '\n' || body.back() == '\r'))
                body.pop_back();
            auto const id = fmt::format("{}@{}", n, sha256_hex(body).substr(0, 8));
            out.emplace(std::string(n), PromptTemplate { std::string(n), id, std::move(body) });
        }
        return out;
    }();
    auto const it = templates.find(name);
    if (it == templates.end())
        throw ConfigError(fmt::format("no prompt template named '{}'", name));
    return it->second;
}

std::string fill_template(std::string_view text, std::map<std::string, std::string> const& vars)
{
    std::string out;
    std::set<std::string> used;
    std::size_t pos = 0;
    while (true)
    {
        auto const open = text.find("{{", pos);
        if (open == std::string_view::npos)
        {
            out.append(text.substr(pos));
            break;
        }
        auto const close = text.find("}}", open);
        if (close == std::string_view::npos)
            throw ConfigError("unterminated placeholder in prompt template");
        out.append(text.substr(pos, open - pos));
        auto const key = std::string(text.substr(open + 2, close - open - 2));
        auto const it = vars.find(key);
        if (it == vars.end())
            throw ConfigError(fmt::format("prompt template placeholder '{}' has no value", key));
        out.append(it->second);
        used.insert(key);
        pos = close + 2;
    }
    for (auto const& [k, v]: vars)
        if (!used.contains(k))
            throw ConfigError(fmt::format("prompt variable '{}' is not used by the template", k));
    return out;
}

std::string number_steps(std::vector<std::string> const& steps, bool open_next)
{
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i)
    {
        if (i > 0)
            out += ' ';
        out += fmt::format("{}. {}", i + 1, steps[i]);
    }
    if (open_next)
        out += fmt::format("{}{}.", steps.empty() ? "" : " ", steps.size() + 1);
    return out;
}

std::vector<std::string> parse_numbered_steps(std::string_view text)
{
    std::vector<std::string> out;
    auto const t = trim(text);
    std::string_view rest = t;
    std::size_t n = 1;
    auto marker = [](std::size_t k) { return fmt::format("{}.", k); };
    if (!rest.starts_with(marker(1)))
        return out;
    rest.remove_prefix(marker(1).size());
    while (true)
    {
        // the next item starts at " <n+1>." followed by a space or the end of text
        auto const next = " " + marker(n + 1);
        std::size_t cut = std::string_view::npos;
        for (std::size_t from = 0; (from = rest.find(next, from)) != std::string_view::npos; ++from)
        {
            auto const after = from + next.size();
            if (after == rest.size() || rest[after] == ' ')
            {
                cut = from;
                break;
            }
        }
        auto const item = trim(rest.substr(0, cut));
        if (!item.empty())
            out.push_back(item);
        if (cut == std::string_view::npos)
            break;
        rest.remove_prefix(cut + next.size());
        ++n;
    }
    return out;
}

// Generator prompt -------------------------------------------------------------

std::string PromptBundle::render() const
{
    std::string out = system_preamble;
    out += "\n\n";
    for (auto const& b: example_blocks)
        out += fmt::format("Skill Library: {}\nTask: {}\nskill steps: {}\n\n", b.library, b.task, b.steps);
    out += query_block;
    return out;
}

namespace
{
    std::string example_library(InContextExample const& ex, std::vector<std::string> const& candidates)
    {
        std::vector<std::string> items;
        for (auto const& s: ex.steps)
            push_unique(items, s);
        for (auto const& c: candidates)
        {
            if (items.size() >= ExampleLibrarySize)
                break;
            push_unique(items, c);
        }
        // stable pseudo-shuffle so the steps are not simply listed in order
        std::stable_sort(items.begin(), items.end(), [&](auto const& a, auto const& b) {
            return fnv1a64(ex.semantic + "|" + a) < fnv1a64(ex.semantic + "|" + b);
        });
        return join(items, ", ");
    }

    std::size_t rfind_line(std::string_view text, std::string_view prefix)
    {
        auto const at = text.rfind(std::string("\n").append(prefix));
        return at == std::string_view::npos ? at : at + 1;
    }

    std::string line_value(std::string_view text, std::size_t start, std::string_view prefix)
    {
        auto const from = start + prefix.size();
        auto const end = text.find('\n', from);
        return std::string(text.substr(from, end == std::string_view::npos ? std::string_view::npos : end - from));
    }
} // namespace

PromptBundle build_generator_prompt(std::string_view instruction, ExecutionHistory const& history,
                                    std::vector<InContextExample> const& examples,
                                    std::vector<std::string> const& candidates)
{
    if (candidates.empty())
        throw Error("cannot build a generator prompt without candidates");
    if (trim(instruction).empty())
        throw Error("cannot build a generator prompt without an instruction");

    auto const& tpl = prompt_template("generator");
    auto const split = tpl.text.find("{{examples}}");
    if (split == std::string::npos)
        throw ConfigError("generator template lacks an {{examples}} placeholder");

    PromptBundle bundle;
    bundle.template_id = tpl.id;
    bundle.system_preamble = trim(tpl.text.substr(0, split));
    for (auto const& ex: examples)
    {
        if (ex.steps.empty())
            continue;
        bundle.example_blocks.push_back({ example_library(ex, candidates), ex.semantic, number_steps(ex.steps) });
    }
    bundle.query_block = fill_template(tpl.text.substr(split + std::string_view("{{examples}}").size()),
                                       {
                                           { "candidates", join(candidates, ", ") },
                                           { "instruction", std::string(trim(instruction)) },
                                           { "history", number_steps(history.steps, true) },
                                       });
    return bundle;
}

GeneratorQuery parse_generator_prompt(std::string_view prompt)
{
    GeneratorQuery q;
    auto const lib = rfind_line(prompt, "Skill library: ");
    if (lib == std::string_view::npos)
        throw ParseError("not a generator prompt: no skill library line");
    for (auto const& c: split(line_value(prompt, lib, "Skill library: "), ','))
        if (auto const t = trim(c); !t.empty())
            q.candidates.push_back(t);
    auto const tail = prompt.substr(lib);
    auto const task = tail.find("\nTask: ");
    auto const steps = tail.find("\nskill steps: ");
    if (task == std::string_view::npos || steps == std::string_view::npos)
        throw ParseError("not a generator prompt: no task or skill steps line");
    q.instruction = line_value(tail, task + 1, "Task: ");
    q.history = parse_numbered_steps(tail.substr(steps + std::string_view("\nskill steps: ").size()));
    return q;
}

// Matching ---------------------------------------------------------------------

std::string_view to_string(MatchKind kind)
{
    switch (kind)
    {
    case MatchKind::Exact:
        return "exact";
    case MatchKind::Normalized:
        return "normalized";
    case MatchKind::Cosine:
        return "cosine";
    case MatchKind::Done:
        return "done";
    }
    return "?";
}

std::string clean_skill_output(std::string_view raw)
{
    std::string line;
    for (auto const& l: split(raw, '\n'))
        if (auto t = trim(l); !t.empty())
        {
            line = std::move(t);
            break;
        }
    static std::regex const leadingNumber(R"(^\d+\s*[.)]\s*)");
    static std::regex const nextNumber(R"(\s+\d+\s*[.)](\s.*)?$)");
    line = std::regex_replace(line, leadingNumber, "");
    line = std::regex_replace(line, nextNumber, "");
    auto const strip = [](std::string& s) {
        while (!s.empty() && std::string_view("\"'`*.,;: ").find(s.back()) != std::string_view::npos)
            s.pop_back();
        std::size_t i = 0;
        while (i < s.size() && std::string_view("\"'`* ").find(s[i]) != std::string_view::npos)
            ++i;
        s.erase(0, i);
    };
    strip(line);
    return line;
}

std::optional<GeneratedSkill> match_candidate(std::string_view raw, std::vector<std::string> const& candidates,
                                              Embedder const& embedder)
{
    auto const cleaned = clean_skill_output(raw);
    if (cleaned.empty())
        return std::nullopt;
    auto const norm = normalize_skill_text(cleaned);
    if (norm == DoneToken)
        return GeneratedSkill { "", MatchKind::Done, std::string(raw), 1 };
    for (auto const& c: candidates)
        if (c == cleaned)
            return GeneratedSkill { c, MatchKind::Exact, std::string(raw), 1 };
    for (auto const& c: candidates)
        if (normalize_skill_text(c) == norm)
            return GeneratedSkill { c, MatchKind::Normalized, std::string(raw), 1 };

    std::optional<EmbeddingVector> query;
    try
    {
        query = embedder.embed(cleaned);
    }
    catch (Error const&)
    {
        return std::nullopt;
    }
    double best = -1.0;
    std::string const* pick = nullptr;
    for (auto const& c: candidates)
    {
        double s = 0.0;
        try
        {
            s = cosine(*query, embedder.embed(c));
        }
        catch (Error const&)
        {
            continue;
        }
        // first candidate wins ties, matching the library order the LM saw
        if (s > best)
        {
            best = s;
            pick = &c;
        }
    }
    if (pick && best >= CosineFloor)
        return GeneratedSkill { *pick, MatchKind::Cosine, std::string(raw), 1 };
    return std::nullopt;
}

GeneratedSkill generate_skill(LmBackend& lm, PromptBundle const& prompt, std::vector<std::string> const& candidates,
                              Embedder const& embedder)
{
    if (candidates.empty())
        throw Error("cannot generate a skill without candidates");
    CompletionRequest req { prompt.render(), prompt.temperature, prompt.max_tokens, Purpose::Generator };
    auto const first = lm.complete(req);
    if (auto m = match_candidate(first, candidates, embedder))
        return *m;

    auto retry = prompt;
    retry.query_block = "Answer with exactly one skill copied from the Skill library.\n" + retry.query_block;
    req.prompt = retry.render();
    auto const second = lm.complete(req);
    if (auto m = match_candidate(second, candidates, embedder))
    {
        m->attempts = 2;
        return *m;
    }
    throw UnparseableOutputError(
        fmt::format("generator output matches no candidate after a retry: '{}'", clean_skill_output(second)),
        first + "\n---\n" + second);
}

// Task retriever -----------------------------------------------------------------

std::string build_refinement_prompt(std::string_view skill, std::string_view feedback,
                                    std::vector<std::string> const& lower_candidates)
{
    return fill_template(prompt_template("retriever").text,
                         {
                             { "skill", std::string(trim(skill)) },
                             { "feedback", std::string(trim(feedback)) },
                             { "lower", lower_candidates.empty() ? std::string("none") : join(lower_candidates, ", ") },
                         });
}

RefinementQuery parse_refinement_prompt(std::string_view prompt)
{
    RefinementQuery q;
    auto const s = rfind_line(prompt, "Skill: ");
    if (s == std::string_view::npos)
        throw ParseError("not a refinement prompt: no skill line");
    auto const tail = prompt.substr(s);
    auto const f = tail.find("\nFeedback: ");
    auto const l = tail.find("\nLower-level skills: ");
    if (f == std::string_view::npos || l == std::string_view::npos)
        throw ParseError("not a refinement prompt: missing feedback or lower-level skills");
    q.skill = line_value(tail, 0, "Skill: ");
    q.feedback = line_value(tail, f + 1, "Feedback: ");
    auto const lower = line_value(tail, l + 1, "Lower-level skills: ");
    if (lower != "none")
        for (auto const& c: split(lower, ','))
            if (auto const t = trim(c); !t.empty())
                q.lower_candidates.push_back(t);
    return q;
}

RefinedInstruction refine_instruction(LmBackend& lm, std::string_view skill, std::string_view feedback,
                                      std::vector<std::string> const& lower_candidates)
{
    if (trim(feedback).empty())
        throw Error("refinement needs critic feedback");
    if (trim(skill).empty())
        throw Error("refinement needs a skill");
    CompletionRequest req { build_refinement_prompt(skill, feedback, lower_candidates), 0.0, 64, Purpose::Retriever };
    auto const reply = lm.complete(req);
    std::string text;
    for (auto const& l: split(reply, '\n'))
        if (auto t = trim(l); !t.empty())
        {
            text = std::move(t);
            break;
        }
    if (starts_with_ci(text, "instruction:"))
        text = trim(std::string_view(text).substr(std::string_view("instruction:").size()));
    if (text.empty())
        throw EmptyResponseError("task retriever returned an empty instruction");
    if (normalize_skill_text(text) == normalize_skill_text(skill))
        throw EmptyResponseError("task retriever repeated the blocked skill");
    return { text, std::string(trim(skill)), std::string(trim(feedback)), prompt_template("retriever").id };
}

} // namespace semgro
