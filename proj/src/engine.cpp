// SPDX-License-Identifier: Apache-2.0
#include <semgro/engine.hpp>

#include <set>

#include <fmt/format.h>

namespace semgro
{

std::string_view to_string(Mode mode)
{
    switch (mode)
    {
    case Mode::SemGro:
        return "semgro";
    case Mode::SgL:
        return "sg_l";
    case Mode::SgM:
        return "sg_m";
    case Mode::SgH:
        return "sg_h";
    }
    return "?";
}

Mode parse_mode(std::string_view text)
{
    auto const t = normalize_text(text);
    for (auto m: { Mode::SemGro, Mode::SgL, Mode::SgM, Mode::SgH })
        if (to_string(m) == t)
            return m;
    throw ConfigError(fmt::format("unknown mode '{}' (expected semgro, sg_l, sg_m or sg_h)", text));
}

std::string_view to_string(Outcome outcome)
{
    switch (outcome)
    {
    case Outcome::Done:
        return "done";
    case Outcome::BudgetExhausted:
        return "budget-exhausted";
    case Outcome::Error:
        return "error";
    }
    return "?";
}

Outcome parse_outcome(std::string_view text)
{
    for (auto o: { Outcome::Done, Outcome::BudgetExhausted, Outcome::Error })
        if (to_string(o) == text)
            return o;
    throw ParseError(fmt::format("unknown outcome '{}'", text));
}

void check_config(EngineConfig const& config)
{
    if (config.k == 0)
        throw ConfigError("k must be at least 1");
    if (config.max_iterations == 0)
        throw ConfigError("max_iterations must be at least 1");
}

std::optional<LevelRange> level_filter(Mode mode, int max_level)
{
    if (max_level < 1)
        throw ConfigError("the skill database is empty");
    switch (mode)
    {
    case Mode::SemGro:
        return std::nullopt;
    case Mode::SgL:
        return LevelRange { 1, 1 };
    case Mode::SgH:
        return LevelRange { max_level, max_level };
    case Mode::SgM:
        if (max_level - 1 < 2)
            throw ConfigError(fmt::format("a database with {} levels has no middle tier", max_level));
        return LevelRange { 2, max_level - 1 };
    }
    return std::nullopt;
}

namespace
{
    // Fixed-level planning: every retrieved skill is taken down to the mode's levels, so the
    // candidates are the retrieved skills (or their constituents) at that abstraction.
    void project(SkillEntry const& entry, SkillDatabase const& db, LevelRange const& range, std::vector<std::string>& out)
    {
        if (range.contains(entry.id.level))
        {
            push_unique(out, entry.semantic);
            return;
        }
        if (entry.id.level < range.lo)
            return;
        for (auto const& ref: entry.plan)
            if (auto const* member = db.find(ref))
                project(*member, db, range, out);
    }

    CandidateSets fixed_level_sets(RetrievalResult const& result, SkillDatabase const& db, LevelRange const& range)
    {
        CandidateSets sets;
        for (auto const& scored: result.entries)
        {
            auto const& entry = *scored.entry;
            sets.examples.push_back({ entry.semantic, db.plan_semantics(entry) });
            project(entry, db, range, sets.candidates);
        }
        return sets;
    }

    std::vector<std::string> primitive_strings(std::vector<SkillPrimitive> const& ps)
    {
        std::vector<std::string> out;
        out.reserve(ps.size());
        for (auto const& p: ps)
            out.push_back(p.str());
        return out;
    }

    class Loop
    {
      public:
        Loop(std::string_view instruction, Environment& env, SkillDatabase const& db, PlannerStack planner,
             Critic* critic, EngineConfig const& config, StepCallback const& on_step):
            _env(env), _db(db), _planner(planner), _critic(critic), _config(config), _onStep(on_step)
        {
            check_config(config);
            if (trim(instruction).empty())
                throw ConfigError("cannot ground an empty instruction");
            if (config.mode == Mode::SemGro && !critic)
                throw ConfigError("semgro mode needs a critic");
            _levels = level_filter(config.mode, db.max_level());

            _trace.instruction = trim(instruction);
            _trace.mode = config.mode;
            _trace.k = config.k;
            _trace.max_iterations = config.max_iterations;
            _trace.max_depth = config.max_depth;
            _trace.critic_id = config.mode == Mode::SemGro ? critic->id() : "bypass";
            _trace.lm_id = planner.lm.id();
            _trace.generator_template = prompt_template("generator").id;
            _trace.retriever_template = prompt_template("retriever").id;
            _trace.goals_total = env.goals.size();
            _stack.push_back({ _trace.instruction, {}, FrameKind::Root, 0 });
        }

        GroundingTrace run()
        {
            auto const startSteps = _env.live.step_count;
            try
            {
                while (!finished())
                {
                    if (_env.done())
                        stop(Outcome::Done, "goals met");
                    else if (_iterations >= _config.max_iterations)
                        stop(Outcome::BudgetExhausted, "max iterations");
                    else if (_env.live.step_count - startSteps >= _env.step_budget)
                        stop(Outcome::BudgetExhausted, "step budget");
                    else
                        iterate();
                }
            }
            catch (std::exception const& e)
            {
                stop(Outcome::Error, e.what());
            }
            _trace.goals_met = goals_met(_env.live, _env.goals);
            _trace.primitive_steps = _env.live.step_count - startSteps;
            _trace.final_hash = state_hash(_env.live);
            return std::move(_trace);
        }

      private:
        [[nodiscard]] bool finished() const { return _stopped; }

        void stop(Outcome outcome, std::string reason)
        {
            _trace.outcome = outcome;
            _trace.stop_reason = std::move(reason);
            _stopped = true;
        }

        void iterate()
        {
            auto& frame = _stack.back();
            TraceStep step;
            step.index = _trace.steps.size();
            step.instruction = frame.instruction;
            step.kind = frame.kind;
            step.depth = frame.depth;
            step.history = frame.history.steps;
            step.hash_before = state_hash(_env.live);

            auto const obs = observe(_env.live);
            step.room = obs.room;
            step.visible.assign(obs.object_names.begin(), obs.object_names.end());

            // fixed-level modes retrieve from their lowest level upwards and project down
            std::optional<LevelRange> scope;
            if (_levels)
                scope = LevelRange { _levels->lo, _db.max_level() };
            auto const retrieval = _planner.retriever.retrieve_top_k(frame.instruction, obs.object_names, _config.k, scope);
            for (auto const& s: retrieval.entries)
                step.retrieved.push_back(fmt::format("{} {}", s.entry->id.str(), s.entry->semantic));
            auto const sets = _config.mode == Mode::SemGro ? derive_candidate_sets(retrieval, _db)
                                                           : fixed_level_sets(retrieval, _db, *_levels);
            step.candidates = sets.candidates;
            step.lower_candidates = sets.lower_candidates;

            auto const bundle = build_generator_prompt(frame.instruction, frame.history, sets.examples, sets.candidates);
            step.template_id = bundle.template_id;
            ++_iterations;
            auto const gen = generate_skill(_planner.lm, bundle, sets.candidates, _planner.embedder);
            step.match = to_string(gen.match);
            step.attempts = gen.attempts;

            if (gen.done())
            {
                step.event = "done";
                if (frame.kind == FrameKind::Root)
                    stop(_env.done() ? Outcome::Done : Outcome::BudgetExhausted,
                         _env.done() ? "goals met" : "planner finished before the goals");
                else
                    pop_into_parent();
                finish(step);
                return;
            }
            step.generated = gen.semantic;
            step.planned = primitive_strings(resolve_primitives(_db, gen.semantic));

            if (_config.mode != Mode::SemGro)
            {
                execute(step);
                frame.history.append(gen.semantic); // failed attempts stay visible to the planner
                step.event = "execute";
                finish(step);
                return;
            }

            CriticContext ctx { _env.live, obs, sets.lower_candidates };
            auto report = _critic->assess(ctx, gen.semantic);
            step.dry_run_pure = report.dry_run_pure && state_hash(_env.live) == step.hash_before;
            auto verdict = report.verdict;

            if (verdict.executable())
            {
                step.verdict = VerdictRecord { Verdict::E, {}, Cause::None };
                execute(step);
                if (step.execution_success)
                {
                    frame.history.append(gen.semantic);
                    if (frame.kind == FrameKind::Refinement)
                    {
                        step.event = "pop";
                        pop_into_parent();
                        finish(step);
                        return;
                    }
                }
                step.event = "execute";
                finish(step);
                return;
            }

            if (_env.training_reset)
                verdict.cause = classify_cause(*_env.training_reset, _env.target_reset, _db, gen.semantic);
            else
                verdict.cause = Cause::Unknown;
            step.verdict = VerdictRecord { Verdict::NE, verdict.feedback, verdict.cause };
            ++_counters.all;
            if (verdict.cause == Cause::Domain)
                ++_counters.domain;
            else if (verdict.cause == Cause::Observational)
                ++_counters.observational;
            else
                ++_counters.unknown;

            auto const key = normalize_skill_text(gen.semantic) + "@" + step.hash_before;
            if (frame.depth + 1 > _config.max_depth)
            {
                step.event = "abort";
                stop(Outcome::BudgetExhausted, "max depth");
                finish(step);
                return;
            }
            if (_config.no_progress_abort && !_blocked.insert(key).second)
            {
                step.event = "abort";
                stop(Outcome::BudgetExhausted, "no progress");
                finish(step);
                return;
            }
            auto refined = refine_instruction(_planner.lm, gen.semantic, verdict.feedback, sets.lower_candidates);
            step.refinement = refined.text;
            step.event = "refine";
            auto const depth = frame.depth + 1;
            _stack.push_back({ refined.text, {}, FrameKind::Refinement, depth }); // invalidates `frame`
            finish(step);
        }

        void execute(TraceStep& step)
        {
            step.executed = true;
            auto const result = execute_composite(_env.live, _db, step.generated);
            step.execution_success = result.success;
            step.primitives = primitive_strings(result.executed);
            step.failure_reason = result.failure_reason;
        }

        // A finished refinement hands what it executed to the frame below.
        void pop_into_parent()
        {
            auto child = std::move(_stack.back());
            _stack.pop_back();
            for (auto& s: child.history.steps)
                _stack.back().history.append(std::move(s));
        }

        void finish(TraceStep& step)
        {
            step.hash_after = state_hash(_env.live);
            step.stack_after = _stack.size();
            step.counters = _counters;
            _trace.counters = _counters;
            _trace.steps.push_back(step);
            if (_onStep)
                _onStep(_trace.steps.back());
        }

        Environment& _env;
        SkillDatabase const& _db;
        PlannerStack _planner;
        Critic* _critic;
        EngineConfig _config;
        StepCallback const& _onStep;
        std::optional<LevelRange> _levels;
        std::vector<InstructionFrame> _stack;
        std::set<std::string> _blocked;
        IterationCounters _counters;
        std::size_t _iterations = 0;
        bool _stopped = false;
        GroundingTrace _trace;
    };
} // namespace

GroundingTrace ground(std::string_view instruction, Environment& env, SkillDatabase const& db, PlannerStack planner,
                      Critic* critic, EngineConfig const& config, StepCallback const& on_step)
{
    return Loop(instruction, env, db, planner, critic, config, on_step).run();
}

GroundingTrace run_ablation(std::string_view instruction, Environment& env, SkillDatabase const& db,
                            PlannerStack planner, EngineConfig const& config, StepCallback const& on_step)
{
    if (config.mode == Mode::SemGro)
        throw ConfigError("run_ablation needs one of the fixed-level modes");
    return Loop(instruction, env, db, planner, nullptr, config, on_step).run();
}

std::vector<std::string> planned_sequence(GroundingTrace const& trace)
{
    std::vector<std::string> out;
    for (auto const& s: trace.steps)
        if (s.executed)
            out.insert(out.end(), s.planned.begin(), s.planned.end());
    return out;
}

} // namespace semgro
