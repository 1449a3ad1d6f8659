// SPDX-License-Identifier: Apache-2.0
#pragma once
// Hand-counted metric fixtures shared by the unit tests and the acceptance run.

#include <semgro/evalharness.hpp>

namespace semgro::fixture
{

// Compact step builder for hand-made traces.
inline TraceStep step(std::string generated, bool executed, bool ok, std::vector<std::string> planned = {})
{
    TraceStep s;
    s.event = generated.empty() ? "done" : executed ? "execute" : "refine";
    s.generated = std::move(generated);
    s.executed = executed;
    s.execution_success = ok;
    s.planned = std::move(planned);
    return s;
}

inline EpisodeResult episode(std::string id, std::vector<TraceStep> steps, std::size_t met, std::size_t total,
                      std::vector<std::string> gt)
{
    EpisodeResult e;
    e.scenario_id = std::move(id);
    e.seed = 1;
    e.trace.instruction = "do it";
    e.trace.steps = std::move(steps);
    e.trace.goals_met = met;
    e.trace.goals_total = total;
    e.trace.outcome = met == total ? Outcome::Done : Outcome::BudgetExhausted;
    e.ground_truth = std::move(gt);
    return e;
}

inline ScenarioSpec spec_for(std::string id)
{
    ScenarioSpec s;
    s.id = std::move(id);
    s.world = "w";
    s.instruction = "do it";
    return s;
}

// Six fixtures. Expected values were counted by hand before the metric code was written:
//   f1 one skill, all goals, plan equals gt              SR 1 CGC 1   Plan 4/4 Exec 1/1
//   f2 NE then a refined skill, done                     SR 1 CGC 1   Plan 5/5 Exec 1/2
//   f3 one good skill then a wrong one failing           SR 0 CGC 1/2 Plan 4/6 Exec 1/2
//   f4 setup error, nothing ran                          SR 0 CGC 0   Plan 0/2 Exec -
//   f5 no goals, empty gt, planner done at once          SR 1 CGC 1   Plan 1   Exec -
//   f6 two NE, a detour, then the right skill            SR 1 CGC 1   Plan 0/2 Exec 2/4
inline std::vector<EpisodeResult> fixtures()
{
    std::vector<EpisodeResult> out;
    out.push_back(episode("f1",
                          { step("put a on b", true, true, { "walk a", "grab a", "walk b", "put a b" }) }, 2, 2,
                          { "walk a", "grab a", "walk b", "put a b" }));

    auto f2 = episode("f2",
                      { step("put a in c", false, false),
                        step("open c and put a in c", true, true, { "walk a", "grab a", "walk c", "open c", "put a c" }),
                        step("", false, false) },
                      1, 1, { "walk a", "grab a", "walk c", "open c", "put a c" });
    f2.trace.counters = { 1, 1, 0, 0 };
    out.push_back(f2);

    out.push_back(episode("f3",
                          { step("put a on b", true, true, { "walk a", "grab a", "walk b", "put a b" }),
                            step("turn on d", true, false, { "walk d", "switchon d" }) },
                          1, 2, { "walk a", "grab a", "walk b", "put a b", "walk c", "switchon c" }));

    auto f4 = episode("f4", {}, 0, 3, { "walk a", "grab a" });
    f4.setup_error = "cannot calibrate";
    f4.trace.outcome = Outcome::Error;
    out.push_back(f4);

    out.push_back(episode("f5", { step("", false, false) }, 0, 0, {}));

    auto f6 = episode("f6",
                      { step("grab a", false, false), step("grab a", false, false),
                        step("walk b", true, true, { "walk b" }),
                        step("pick up a", true, true, { "walk a", "grab a" }) },
                      1, 1, { "walk a", "grab a" });
    f6.trace.counters = { 2, 0, 2, 0 };
    out.push_back(f6);
    return out;
}

inline std::vector<ScenarioSpec> fixture_specs()
{
    std::vector<ScenarioSpec> out;
    for (auto const* id: { "f1", "f2", "f3", "f4", "f5", "f6" })
        out.push_back(spec_for(id));
    return out;
}

} // namespace semgro::fixture
