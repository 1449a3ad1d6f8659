// SPDX-License-Identifier: Apache-2.0
// Trace files and the invariant checker.
#include <semgro/engine.hpp>

#include <fmt/format.h>
#include <json.hpp>

namespace semgro
{

using nlohmann::json;

namespace
{
    json counters_json(IterationCounters const& c)
    {
        return { { "all", c.all }, { "domain", c.domain }, { "observational", c.observational }, { "unknown", c.unknown } };
    }

    IterationCounters counters_from(json const& j)
    {
        return { j.at("all").get<std::size_t>(), j.at("domain").get<std::size_t>(),
                 j.at("observational").get<std::size_t>(), j.at("unknown").get<std::size_t>() };
    }

    std::string_view kind_name(FrameKind k)
    {
        return k == FrameKind::Root ? "root" : "refinement";
    }

    FrameKind parse_kind(std::string const& s)
    {
        if (s == "root")
            return FrameKind::Root;
        if (s == "refinement")
            return FrameKind::Refinement;
        throw ParseError(fmt::format("unknown frame kind '{}'", s));
    }

    json step_json(TraceStep const& s)
    {
        json j = {
            { "type", "step" },
            { "index", s.index },
            { "instruction", s.instruction },
            { "kind", kind_name(s.kind) },
            { "depth", s.depth },
            { "history", s.history },
            { "room", s.room },
            { "visible", s.visible },
            { "retrieved", s.retrieved },
            { "candidates", s.candidates },
            { "lower_candidates", s.lower_candidates },
            { "template_id", s.template_id },
            { "generated", s.generated },
            { "match", s.match },
            { "attempts", s.attempts },
            { "executed", s.executed },
            { "execution_success", s.execution_success },
            { "primitives", s.primitives },
            { "planned", s.planned },
            { "failure_reason", s.failure_reason },
            { "event", s.event },
            { "stack_after", s.stack_after },
            { "hash_before", s.hash_before },
            { "hash_after", s.hash_after },
            { "dry_run_pure", s.dry_run_pure },
            { "counters", counters_json(s.counters) },
        };
        j["verdict"] = s.verdict ? json { { "tag", to_string(s.verdict->tag) },
                                          { "feedback", s.verdict->feedback },
                                          { "cause", to_string(s.verdict->cause) } }
                                 : json(nullptr);
        j["refinement"] = s.refinement ? json(*s.refinement) : json(nullptr);
        return j;
    }

    TraceStep step_from(json const& j)
    {
        TraceStep s;
        s.index = j.at("index").get<std::size_t>();
        s.instruction = j.at("instruction").get<std::string>();
        s.kind = parse_kind(j.at("kind").get<std::string>());
        s.depth = j.at("depth").get<std::size_t>();
        s.history = j.at("history").get<std::vector<std::string>>();
        s.room = j.at("room").get<std::string>();
        s.visible = j.at("visible").get<std::vector<std::string>>();
        s.retrieved = j.at("retrieved").get<std::vector<std::string>>();
        s.candidates = j.at("candidates").get<std::vector<std::string>>();
        s.lower_candidates = j.at("lower_candidates").get<std::vector<std::string>>();
        s.template_id = j.at("template_id").get<std::string>();
        s.generated = j.at("generated").get<std::string>();
        s.match = j.at("match").get<std::string>();
        s.attempts = j.at("attempts").get<int>();
        s.executed = j.at("executed").get<bool>();
        s.execution_success = j.at("execution_success").get<bool>();
        s.primitives = j.at("primitives").get<std::vector<std::string>>();
        s.planned = j.at("planned").get<std::vector<std::string>>();
        s.failure_reason = j.at("failure_reason").get<std::string>();
        s.event = j.at("event").get<std::string>();
        s.stack_after = j.at("stack_after").get<std::size_t>();
        s.hash_before = j.at("hash_before").get<std::string>();
        s.hash_after = j.at("hash_after").get<std::string>();
        s.dry_run_pure = j.at("dry_run_pure").get<bool>();
        s.counters = counters_from(j.at("counters"));
        if (auto const& v = j.at("verdict"); !v.is_null())
        {
            auto const tag = v.at("tag").get<std::string>();
            if (tag != "E" && tag != "NE")
                throw ParseError(fmt::format("unknown verdict '{}'", tag));
            s.verdict = VerdictRecord { tag == "E" ? Verdict::E : Verdict::NE, v.at("feedback").get<std::string>(),
                                        parse_cause(v.at("cause").get<std::string>()) };
        }
        if (auto const& r = j.at("refinement"); !r.is_null())
            s.refinement = r.get<std::string>();
        return s;
    }
} // namespace

std::string serialize_trace(GroundingTrace const& t)
{
    std::string out;
    json const header = {
        { "type", "header" },
        { "schema", t.schema },
        { "instruction", t.instruction },
        { "mode", to_string(t.mode) },
        { "k", t.k },
        { "max_iterations", t.max_iterations },
        { "max_depth", t.max_depth },
        { "critic", t.critic_id },
        { "lm", t.lm_id },
        { "generator_template", t.generator_template },
        { "retriever_template", t.retriever_template },
    };
    out += header.dump() + "\n";
    for (auto const& s: t.steps)
        out += step_json(s).dump() + "\n";
    json const footer = {
        { "type", "footer" },
        { "outcome", to_string(t.outcome) },
        { "stop_reason", t.stop_reason },
        { "goals_met", t.goals_met },
        { "goals_total", t.goals_total },
        { "primitive_steps", t.primitive_steps },
        { "counters", counters_json(t.counters) },
        { "final_hash", t.final_hash },
    };
    out += footer.dump() + "\n";
    return out;
}

GroundingTrace parse_trace(std::string_view text)
{
    GroundingTrace t;
    bool header = false;
    bool footer = false;
    std::size_t lineNo = 0;
    for (auto const& raw: split(text, '\n'))
    {
        ++lineNo;
        if (trim(raw).empty())
            continue;
        if (footer)
            throw ParseError("content after the trace footer", lineNo);
        json j;
        try
        {
            j = json::parse(raw);
        }
        catch (json::parse_error const& e)
        {
            throw ParseError(fmt::format("malformed trace line: {}", e.what()), lineNo);
        }
        try
        {
            auto const type = j.at("type").get<std::string>();
            if (!header)
            {
                if (type != "header")
                    throw ParseError("trace does not start with a header", lineNo);
                t.schema = j.at("schema").get<std::string>();
                if (t.schema != TraceSchema)
                    throw ParseError(fmt::format("unsupported trace schema '{}'", t.schema), lineNo);
                t.instruction = j.at("instruction").get<std::string>();
                t.mode = parse_mode(j.at("mode").get<std::string>());
                t.k = j.at("k").get<std::size_t>();
                t.max_iterations = j.at("max_iterations").get<std::size_t>();
                t.max_depth = j.at("max_depth").get<std::size_t>();
                t.critic_id = j.at("critic").get<std::string>();
                t.lm_id = j.at("lm").get<std::string>();
                t.generator_template = j.at("generator_template").get<std::string>();
                t.retriever_template = j.at("retriever_template").get<std::string>();
                header = true;
            }
            else if (type == "step")
                t.steps.push_back(step_from(j));
            else if (type == "footer")
            {
                t.outcome = parse_outcome(j.at("outcome").get<std::string>());
                t.stop_reason = j.at("stop_reason").get<std::string>();
                t.goals_met = j.at("goals_met").get<std::size_t>();
                t.goals_total = j.at("goals_total").get<std::size_t>();
                t.primitive_steps = j.at("primitive_steps").get<std::size_t>();
                t.counters = counters_from(j.at("counters"));
                t.final_hash = j.at("final_hash").get<std::string>();
                footer = true;
            }
            else
                throw ParseError(fmt::format("unexpected trace line type '{}'", type), lineNo);
        }
        catch (json::exception const& e)
        {
            throw ParseError(fmt::format("bad trace line: {}", e.what()), lineNo);
        }
        catch (ConfigError const& e)
        {
            throw ParseError(e.what(), lineNo);
        }
    }
    if (!header)
        throw ParseError("empty trace");
    if (!footer)
        throw ParseError("trace has no footer (truncated?)");
    return t;
}

std::string trace_hash(GroundingTrace const& trace)
{
    return sha256_hex(serialize_trace(trace));
}

std::vector<std::string> check_trace(GroundingTrace const& t)
{
    std::vector<std::string> v;
    auto report = [&](std::size_t i, std::string what) { v.push_back(fmt::format("step {}: {}", i, what)); };

    struct Frame
    {
        std::string instruction;
        FrameKind kind;
        std::size_t depth;
    };
    std::vector<Frame> stack { { t.instruction, FrameKind::Root, 0 } };
    bool const semgro = t.mode == Mode::SemGro;

    for (std::size_t i = 0; i < t.steps.size(); ++i)
    {
        auto const& s = t.steps[i];
        bool const last = i + 1 == t.steps.size();
        if (s.index != i)
            report(i, fmt::format("index is {}", s.index));
        if (stack.empty())
        {
            report(i, "step after the root frame ended");
            break;
        }
        auto const& top = stack.back();
        if (s.instruction != top.instruction || s.kind != top.kind || s.depth != top.depth)
            report(i, fmt::format("frame '{}' at depth {} is not the top of the stack ('{}' at depth {})",
                                  s.instruction, s.depth, top.instruction, top.depth));
        if (s.depth > t.max_depth)
            report(i, fmt::format("depth {} exceeds the bound {}", s.depth, t.max_depth));
        if (i > 0 && t.steps[i - 1].hash_after != s.hash_before)
            report(i, "state changed between steps");
        if (!s.dry_run_pure)
            report(i, "critic assessment modified the live state");

        if (semgro && s.executed && (!s.verdict || s.verdict->tag != Verdict::E))
            report(i, "executed without an E verdict");
        if (!semgro && s.verdict)
            report(i, "ablation step carries a verdict");
        if (!s.executed && s.hash_after != s.hash_before)
            report(i, "state changed without execution");
        if (s.verdict && s.verdict->tag == Verdict::NE)
        {
            if (s.event != "refine" && s.event != "abort")
                report(i, "NE verdict followed by neither a refinement nor an abort");
            if (s.verdict->feedback.empty())
                report(i, "NE verdict without feedback");
        }

        if (s.event == "refine")
        {
            if (!s.verdict || s.verdict->tag != Verdict::NE || !s.refinement)
                report(i, "refinement without an NE verdict and a refined instruction");
            else
                stack.push_back({ *s.refinement, FrameKind::Refinement, s.depth + 1 });
        }
        else if (s.event == "pop")
        {
            if (s.kind != FrameKind::Refinement || !s.execution_success)
                report(i, "pop without a successful execution in a refinement frame");
            stack.pop_back();
        }
        else if (s.event == "done")
        {
            if (s.kind == FrameKind::Root)
            {
                if (!last)
                    report(i, "root frame finished but the trace continues");
                stack.pop_back();
            }
            else
                stack.pop_back();
        }
        else if (s.event == "abort")
        {
            if (!last)
                report(i, "abort is not the last step");
            if (!s.verdict || s.verdict->tag != Verdict::NE)
                report(i, "abort without an NE verdict");
        }
        else if (s.event == "execute")
        {
            if (!s.executed)
                report(i, "execute event without execution");
            if (semgro && s.kind == FrameKind::Refinement && s.execution_success)
                report(i, "refinement frame kept after its own success");
        }
        else
            report(i, fmt::format("unknown event '{}'", s.event));

        auto const expected = s.event == "done" && s.kind == FrameKind::Root ? 1 : stack.size();
        if (s.stack_after != expected)
            report(i, fmt::format("stack size {} after the step, expected {}", s.stack_after, expected));
    }
    if (!t.steps.empty() && t.final_hash != t.steps.back().hash_after)
        v.push_back("final state differs from the last step");
    return v;
}

} // namespace semgro
