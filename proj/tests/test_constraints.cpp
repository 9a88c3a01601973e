#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "csrl/constraints.hpp"
#include "csrl/state.hpp"
#include "oracle.hpp"

namespace csrl {
namespace {

// A - B - C with d0 = A-B (cost 3) and d1 = B-C (cost 4)
Topology abc() { return Topology(3, {{0, 1, 3.0}, {1, 2, 4.0}}); }

FormulationParams params(double e_budget, int l_min = 1, double slack = 0.05) {
  FormulationParams p;
  p.e_budget = e_budget;
  p.e_max = e_budget * 1.05;
  p.l_min = l_min;
  p.reimage_loss_max = 30.0;
  p.count_slack = slack;
  return p;
}

EnvState env_for(const ConstraintSet& cs, double f) {
  EnvState e;
  e.enabled.assign(cs.n_detectors, 0);
  e.f = f;
  return e;
}

TEST(Formulate, PathOfThree) {
  const ConstraintSet cs = formulate_initial(abc(), params(5.0));
  EXPECT_EQ(cs.n_detectors, 2);
  int covers = 0, energy = 0;
  for (const LinearConstraint& c : cs.pre) {
    if (c.id == "energy") {
      ++energy;
      EXPECT_EQ(c.sense, Sense::LessEqual);
      EXPECT_EQ(c.bound, 5.0);
    } else {
      ++covers;
      EXPECT_EQ(c.sense, Sense::GreaterEqual);
      EXPECT_EQ(c.bound, 1.0);
    }
  }
  EXPECT_EQ(covers, 3);
  EXPECT_EQ(energy, 1);
  EXPECT_EQ(count_window_constraints(0.5, 2, 0.05).size(), 2u);
  EXPECT_EQ(cs.post.e_max, 5.0 * 1.05);
  EXPECT_EQ(cs.post.reimage_loss_max, 30.0);
}

TEST(Formulate, RejectsDegreeBelowLMin) {
  EXPECT_THROW(formulate_initial(abc(), params(5.0, 3)), ConstraintError);
}

TEST(Formulate, ZeroBudgetIsUnsat) {
  const Topology t = abc();
  const ConstraintSet cs = formulate_initial(t, params(0.0, 1, 1.0));
  EXPECT_EQ(solve_pre(cs, 0.5).status, SolveStatus::Unsat);
  EXPECT_EQ(oracle::enumerate(oracle::pre_rows(t, 0.0, 1, 0.5, 1.0), 2), -1);
}

TEST(Formulate, ParamsFromEnv) {
  const Topology t = abc();
  EnvConfig env;
  env.budget_fraction = 0.5;
  env.e_max_factor = 1.1;
  env.l_min = 1;
  env.reimage_loss_max = 40.0;
  const FormulationParams p = formulation_params(t, env);
  EXPECT_DOUBLE_EQ(p.e_budget, 3.5);
  EXPECT_DOUBLE_EQ(p.e_max, 3.5 * 1.1);
  EXPECT_EQ(p.reimage_loss_max, 40.0);
}

TEST(CountWindow, RoundPlusMinusSlack) {
  EXPECT_EQ(count_window(0.5, 200, 0.05), std::make_pair(90, 110));
  EXPECT_EQ(count_window(0.0, 200, 0.05), std::make_pair(0, 10));
  EXPECT_EQ(count_window(1.0, 200, 0.05), std::make_pair(190, 200));
  EXPECT_EQ(count_window(0.75, 5, 0.05), std::make_pair(4, 4));
  EXPECT_EQ(count_window(0.5, 2, 1.0), std::make_pair(0, 2));
}

TEST(Solve, PathExamples) {
  const ConstraintSet tight = formulate_initial(abc(), params(5.0, 1, 1.0));
  const SatResult unsat = solve_pre(tight, 1.0);
  EXPECT_EQ(unsat.status, SolveStatus::Unsat);
  EXPECT_FALSE(unsat.violated_ids.empty());

  const ConstraintSet loose = formulate_initial(abc(), params(7.0, 1, 1.0));
  const SatResult sat = solve_pre(loose, 1.0);
  ASSERT_TRUE(sat.sat());
  EXPECT_EQ(sat.assignment, (std::vector<std::uint8_t>{1, 1}));
}

TEST(Solve, EmptyAssignmentWhenNothingRequired) {
  const ConstraintSet cs = formulate_initial(abc(), params(0.0, 0, 0.0));
  EXPECT_EQ(count_window(0.0, 2, 0.0), std::make_pair(0, 0));
  const SatResult r = solve_pre(cs, 0.0);
  ASSERT_TRUE(r.sat());
  EXPECT_EQ(r.assignment, (std::vector<std::uint8_t>{0, 0}));
}

TEST(Solve, RejectsMalformedRows) {
  std::vector<LinearConstraint> rows{{"x", {{1.0, 5}}, Sense::LessEqual, 1.0}};
  EXPECT_THROW(solve(rows, 2), ConstraintError);
  rows = {{"y", {}, Sense::LessEqual, 1.0}};
  EXPECT_THROW(solve(rows, 2), ConstraintError);
}

TEST(Solve, AgreesWithEnumerationOnPreInstances) {
  Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    const oracle::SolverInstance inst = oracle::random_instance(rng, 16);
    const ConstraintSet cs = formulate_initial(inst.topology, inst.params);
    const SatResult r = solve_pre(cs, inst.target_f);
    const auto rows = oracle::pre_rows(inst.topology, inst.params.e_budget, inst.params.l_min,
                                       inst.target_f, inst.params.count_slack);
    const long long witness = oracle::enumerate(rows, inst.topology.n_detectors());
    ASSERT_NE(r.status, SolveStatus::Unknown) << "instance " << i;
    EXPECT_EQ(r.sat(), witness >= 0) << "instance " << i;
    if (r.sat()) EXPECT_TRUE(oracle::all_hold(rows, oracle::to_mask(r.assignment)));
    else EXPECT_FALSE(r.violated_ids.empty());
  }
}

TEST(Solve, AgreesWithEnumerationOnMixedRows) {
  // general rows: mixed signs, both senses, fractional coefficients
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 12));
    const int m = 1 + static_cast<int>(uniform_index(rng, 6));
    std::vector<LinearConstraint> rows;
    for (int j = 0; j < m; ++j) {
      LinearConstraint c{"r" + std::to_string(j), {}, uniform01(rng) < 0.5 ? Sense::LessEqual : Sense::GreaterEqual, 0.0};
      double pos = 0.0;
      for (int v = 0; v < n; ++v) {
        if (uniform01(rng) < 0.4) continue;
        const double coef = 0.5 * (static_cast<double>(uniform_index(rng, 9)) - 2.0);
        c.terms.push_back({coef, v});
        pos += std::max(coef, 0.0);
      }
      if (c.terms.empty()) c.terms.push_back({1.0, 0});
      c.bound = 0.25 * std::round(4.0 * (uniform01(rng) * (pos + 1.0) - 0.5));
      rows.push_back(c);
    }
    const SatResult r = solve(rows, n);
    const long long witness = oracle::enumerate(rows, n);
    ASSERT_NE(r.status, SolveStatus::Unknown);
    EXPECT_EQ(r.sat(), witness >= 0) << "instance " << i;
    if (r.sat()) EXPECT_TRUE(oracle::all_hold(rows, oracle::to_mask(r.assignment)));
  }
}

TEST(Solve, AddingARowNeverRestoresSat) {
  Rng rng(55);
  for (int i = 0; i < 150; ++i) {
    const oracle::SolverInstance inst = oracle::random_instance(rng, 14);
    const ConstraintSet cs = formulate_initial(inst.topology, inst.params);
    const bool base = solve_pre(cs, inst.target_f).sat();
    LinearConstraint extra{"extra", {}, Sense::GreaterEqual, 1.0};
    for (int d = 0; d < cs.n_detectors; ++d)
      if (uniform01(rng) < 0.3) extra.terms.push_back({1.0, d});
    if (extra.terms.empty()) extra.terms.push_back({1.0, 0});
    const ConstraintSet more = update_set(cs, {extra}, {});
    const bool after = solve_pre(more, inst.target_f).sat();
    if (!base) EXPECT_FALSE(after) << "instance " << i;
  }
}

TEST(Solve, Deterministic) {
  Rng rng(9);
  const oracle::SolverInstance inst = oracle::random_instance(rng, 20);
  const ConstraintSet cs = formulate_initial(inst.topology, inst.params);
  const SatResult a = solve_pre(cs, inst.target_f), b = solve_pre(cs, inst.target_f);
  EXPECT_EQ(a.status, b.status);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.violated_ids, b.violated_ids);
}

TEST(Solve, ScalesToFullTopology) {
  const Topology t = generate_topology({100, 4.0, 1.0, 5.0}, 1);
  EnvConfig env;
  const ConstraintSet cs = formulate_initial(t, formulation_params(t, env));
  for (double f : {0.25, 0.5, 0.75}) {
    const SatResult r = solve_pre(cs, f);
    ASSERT_NE(r.status, SolveStatus::Unknown) << f;
    if (r.sat())
      for (const LinearConstraint& c : cs.pre) EXPECT_TRUE(c.holds(r.assignment)) << c.id;
  }
  EXPECT_TRUE(solve_pre(cs, env.f_init).sat());
}

TEST(CheckPre, DoNothingAlwaysSatisfied) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const oracle::SolverInstance inst = oracle::random_instance(rng, 12);
    FormulationParams p = inst.params;
    if (i % 2) p.e_budget = 0.0;
    ConstraintSet cs = formulate_initial(inst.topology, p);
    for (int a = 0; a < kDoNothingAction; ++a)
      if (uniform01(rng) < 0.5) cs = update_set(cs, {ExclusionRule{static_cast<int>(i % kNumStates), a}}, {});
    EnvState env = env_for(cs, uniform01(rng));
    for (int s = 0; s < kNumStates; ++s) {
      const PreCheck pc = check_pre(kDoNothingAction, s, env, cs, {});
      EXPECT_TRUE(pc.satisfied);
      EXPECT_FALSE(pc.solver_called);
      EXPECT_EQ(pc.assignment, env.enabled);
    }
  }
}

TEST(CheckPre, RatioIncreaseBeyondEnergy) {
  // five unit-cost links, budget 3; "increase f high" from 0.5 asks for 4
  const Topology t(6, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}, {4, 5, 1.0}});
  const ConstraintSet cs = formulate_initial(t, params(3.0, 0, 0.05));
  const ActionSteps steps;
  const int increase_high = 11;
  ASSERT_EQ(action_class(increase_high), ActionClass::Ratio);
  ASSERT_NEAR(ratio_after(increase_high, 0.5, steps), 0.75, 1e-12);
  EXPECT_EQ(oracle::enumerate(oracle::pre_rows(t, 3.0, 0, 0.75, 0.05), 5), -1);

  const PreCheck pc = check_pre(increase_high, 4, env_for(cs, 0.5), cs, steps);
  EXPECT_FALSE(pc.satisfied);
  EXPECT_TRUE(pc.solver_called);
  EXPECT_NE(std::find(pc.violated_ids.begin(), pc.violated_ids.end(), "energy"),
            pc.violated_ids.end());

  // decreasing is feasible and returns a witness inside the window
  const PreCheck down = check_pre(8, 4, env_for(cs, 0.5), cs, steps);
  ASSERT_TRUE(down.satisfied);
  const auto [lo, hi] = count_window(ratio_after(8, 0.5, steps), 5, 0.05);
  const int on = static_cast<int>(std::count(down.assignment.begin(), down.assignment.end(), 1));
  EXPECT_GE(on, lo);
  EXPECT_LE(on, hi);
}

TEST(CheckPre, ThresholdActionsKeepAssignment) {
  const ConstraintSet cs = formulate_initial(abc(), params(7.0));
  EnvState env = env_for(cs, 0.5);
  env.enabled = {1, 0};
  for (int a : {0, 3, 5, kReimageAction}) {
    const PreCheck pc = check_pre(a, 2, env, cs, {});
    EXPECT_TRUE(pc.satisfied);
    EXPECT_FALSE(pc.solver_called);
    EXPECT_EQ(pc.assignment, env.enabled);
  }
}

TEST(CheckPre, ExclusionRuleBlocksWithoutSolver) {
  ConstraintSet cs = formulate_initial(abc(), params(7.0));
  cs = update_set(cs, {ExclusionRule{4, 9, RuleOrigin::Learned}}, {});
  SolveCache cache;
  const PreCheck pc = check_pre(9, 4, env_for(cs, 0.5), cs, {}, &cache);
  EXPECT_FALSE(pc.satisfied);
  EXPECT_FALSE(pc.solver_called);
  EXPECT_EQ(cache.solver_calls(), 0u);
  EXPECT_EQ(pc.violated_ids, std::vector<std::string>{"exclude:state:4:action:9"});
}

TEST(CheckPost, Examples) {
  ConstraintSet cs = formulate_initial(abc(), params(7.0));
  cs.post.e_max = 10.0;
  cs.post.reimage_loss_max = 20.0;
  RewardParams rp;
  Observation obs;
  obs.energy_actual = 10.0;
  EXPECT_TRUE(check_post(obs, cs, rp).satisfied);

  obs.b_r = 3;
  obs.d_r = 3;
  const PostCheck loss = check_post(obs, cs, rp);
  EXPECT_FALSE(loss.satisfied);
  EXPECT_DOUBLE_EQ(loss.severity, (30.0 - 20.0) / 20.0);
  EXPECT_EQ(loss.violated_ids, std::vector<std::string>{kPostReimageLossId});

  obs.b_r = obs.d_r = 0;
  obs.energy_actual = 5.0;
  EXPECT_TRUE(check_post(obs, cs, rp).satisfied);
  EXPECT_EQ(check_post(obs, cs, rp).severity, 0.0);

  obs.energy_actual = 12.0;
  obs.b_r = 3;
  const PostCheck both = check_post(obs, cs, rp);
  EXPECT_EQ(both.violated_ids.size(), 2u);
  EXPECT_DOUBLE_EQ(both.severity, std::max(0.2, 0.5));
}

TEST(UpdateSet, Examples) {
  const ConstraintSet cs = formulate_initial(abc(), params(7.0));
  const ExclusionRule rule{3, 2, RuleOrigin::Learned};
  const ConstraintSet added = update_set(cs, {rule}, {});
  EXPECT_EQ(added.pre.size() + added.rules.size(), cs.pre.size() + cs.rules.size() + 1);
  EXPECT_GT(added.revision, cs.revision);

  const ConstraintSet removed = update_set(added, {}, {rule.id()});
  EXPECT_TRUE(equivalent(removed, cs));
  const ConstraintSet back = update_set(removed, {rule}, {});
  EXPECT_TRUE(equivalent(back, added));

  EXPECT_THROW(update_set(added, {rule}, {}), ConstraintError);
  EXPECT_THROW(update_set(cs, {}, {"no-such-id"}), ConstraintError);
  EXPECT_THROW(update_set(cs, {ExclusionRule{0, kDoNothingAction}}, {}), ConstraintError);
  EXPECT_THROW(update_set(cs, {LinearConstraint{"energy", {{1.0, 0}}, Sense::LessEqual, 1.0}}, {}),
               ConstraintError);
  EXPECT_THROW(update_set(cs, {LinearConstraint{kPostEnergyId, {{1.0, 0}}, Sense::LessEqual, 1.0}}, {}),
               ConstraintError);

  const ConstraintSet no_energy = update_set(cs, {}, {"energy"});
  EXPECT_EQ(no_energy.find("energy"), nullptr);
  EXPECT_NE(cs.find("energy"), nullptr);
}

TEST(UpdateSet, IdsStayUnique) {
  Rng rng(4);
  ConstraintSet cs = formulate_initial(abc(), params(7.0));
  for (int i = 0; i < 200; ++i) {
    const ExclusionRule r{static_cast<int>(uniform_index(rng, kNumStates)),
                          static_cast<int>(uniform_index(rng, kDoNothingAction))};
    try {
      cs = update_set(cs, {r}, {});
    } catch (const ConstraintError&) {
      EXPECT_TRUE(cs.excludes(r.state, r.action));
    }
    std::set<std::string> ids;
    for (const auto& c : cs.pre) EXPECT_TRUE(ids.insert(c.id).second);
    for (const auto& x : cs.rules) EXPECT_TRUE(ids.insert(x.id()).second);
  }
}

TEST(Dump, AuditLines) {
  ConstraintSet cs = formulate_initial(abc(), params(40.0));
  cs = update_set(cs, {ExclusionRule{4, 9, RuleOrigin::Learned}, ExclusionRule{1, 2}}, {});
  std::ostringstream out;
  dump_constraints(out, cs);
  const std::string text = out.str();
  EXPECT_NE(text.find("pre energy <= 40\n"), std::string::npos);
  EXPECT_NE(text.find("pre cover device:1 >= 1\n"), std::string::npos);
  EXPECT_NE(text.find("exclude state:4 action:9 origin=learned\n"), std::string::npos);
  EXPECT_NE(text.find("exclude state:1 action:2\n"), std::string::npos);
  EXPECT_NE(text.find("post energy_actual <= 42\n"), std::string::npos);
}

TEST(Cache, SurvivesRuleOnlyRevisions) {
  const Topology t = generate_topology({30, 4.0, 1.0, 5.0}, 2);
  EnvConfig env;
  ConstraintSet cs = formulate_initial(t, formulation_params(t, env));
  SolveCache cache;
  const SatResult first = cache.solve(cs, 0.5, {});
  EXPECT_EQ(cache.solver_calls(), 1u);
  cache.solve(cs, 0.5, {});
  cache.solve(cs, 0.505, {});  // same count window
  EXPECT_EQ(cache.solver_calls(), 1u);

  cs = update_set(cs, {ExclusionRule{2, 7, RuleOrigin::Learned}}, {});
  const SatResult& again = cache.solve(cs, 0.5, {});
  EXPECT_EQ(cache.solver_calls(), 1u);
  EXPECT_EQ(again.assignment, first.assignment);

  cs = update_set(cs, {LinearConstraint{"extra", {{1.0, 0}}, Sense::GreaterEqual, 1.0}}, {});
  cache.solve(cs, 0.5, {});
  EXPECT_EQ(cache.solver_calls(), 2u);
  cache.solve(cs, 0.25, {});
  EXPECT_EQ(cache.solver_calls(), 3u);
}

}  // namespace
}  // namespace csrl
