#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mecoff/baselines.hpp"
#include "mecoff/exact_solver.hpp"

namespace mecoff {
namespace {

// Dense backup straight from the model primitives, sharing no code with
// MdpModel's sparse tables.
double dense_backup(const StateSpace& space, const ScenarioSpec& spec, const NetworkState& s, const Action& a,
                    const std::vector<double>& v) {
  const double g = spec.params.discount;
  double next = 0.0;
  for (std::size_t j = 0; j < space.size(); ++j) next += transition_probability(s, a, space[j], spec) * v[j];
  return (1.0 - g) * task_cost(s, a, spec).total_s + g * next;
}

class DeskSolver : public ::testing::Test {
 protected:
  ScenarioSpec spec = desk_scenario();
  MdpModel model{spec};
  ValueTable vt = value_iteration(model);
};

TEST_F(DeskSolver, ConvergesWithContraction) {
  EXPECT_LE(vt.residual, 1e-9);
  for (std::size_t k = 1; k < vt.residual_history.size(); ++k)
    EXPECT_LE(vt.residual_history[k], 0.9 * vt.residual_history[k - 1] + 1e-12) << "sweep " << k;
}

TEST_F(DeskSolver, FixedPointOfDenseBellmanOperator) {
  const auto& space = model.space();
  for (std::size_t i = 0; i < space.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : feasible_actions(space[i], spec))
      best = std::min(best, dense_backup(space, spec, space[i], a, vt.values));
    EXPECT_NEAR(best, vt.values[i], 1e-8);
  }
}

TEST_F(DeskSolver, ValueIsMinimumOfQ) {
  const auto q = q_from_v(model, vt.values);
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < q.n_actions; ++a) best = std::min(best, q(s, a));
    EXPECT_NEAR(best, vt.values[s], 1e-6);
  }
}

TEST_F(DeskSolver, InfeasiblePairsHoldInfinity) {
  const auto q = q_from_v(model, vt.values);
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    const auto mask = feasibility_mask(model.space()[s], spec);
    for (std::size_t a = 0; a < q.n_actions; ++a) EXPECT_EQ(std::isinf(q(s, a)), mask[a] == 0);
  }
}

TEST_F(DeskSolver, ValuesBoundedByCostRange) {
  for (double v : vt.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, model.max_cost() + 1e-12);
  }
  EXPECT_DOUBLE_EQ(model.max_cost(), 9e-3);
}

TEST_F(DeskSolver, OptimalDominatesBaselinesEverywhere) {
  for (auto kind : {PolicyKind::Local, PolicyKind::Cloud, PolicyKind::Greedy}) {
    const auto table = tabulate(model.space(), [&](const NetworkState& s) { return baseline_action(kind, s, spec); });
    const auto pv = policy_values(model, table);
    for (std::size_t s = 0; s < model.n_states(); ++s) EXPECT_LE(vt.values[s], pv.values[s] + 1e-9);
    EXPECT_LE(stationary_average_cost(model, greedy_policy(model, vt.values)),
              stationary_average_cost(model, table) + 1e-12);
  }
}

TEST_F(DeskSolver, GreedyPolicyValueMatchesOptimum) {
  const auto pv = policy_values(model, greedy_policy(model, vt.values));
  for (std::size_t s = 0; s < model.n_states(); ++s) EXPECT_NEAR(pv.values[s], vt.values[s], 1e-8);
}

TEST_F(DeskSolver, StationaryCostAgreesWithSimulation) {
  const auto policy = greedy_policy(model, vt.values);
  const double exact = stationary_average_cost(model, policy);
  const auto sim = evaluate_policy(model, policy, 1e-9, 400'000, 3).average;
  EXPECT_NEAR(sim.cost, exact, std::max(4.0 * sim.half_width, 0.01 * exact));
}

TEST(ExactSolver, ZeroDiscountGivesMyopicCost) {
  const auto spec = desk_scenario(1, {{"discount", "0"}});
  MdpModel model(spec);
  const auto vt = value_iteration(model);
  for (std::size_t i = 0; i < model.n_states(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : feasible_actions(model.space()[i], spec))
      best = std::min(best, task_cost(model.space()[i], a, spec).total_s);
    EXPECT_DOUBLE_EQ(vt.values[i], best);
  }
}

TEST(ExactSolver, AlwaysDropWithCertainTasksCostsTheDropWeight) {
  const auto spec = desk_scenario(1, {{"task_rate", "1"}});
  MdpModel model(spec);
  PolicyTable drop;
  drop.actions.assign(model.n_states(), kIdle);
  const auto pv = policy_values(model, drop, 1e-12);
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    const double expected = model.space()[s].task_present ? 9e-3 : 0.9 * 9e-3;
    EXPECT_NEAR(pv.values[s], expected, 1e-10);
  }
  EXPECT_NEAR(stationary_average_cost(model, drop), 9e-3, 1e-12);
}

TEST(ExactSolver, AlwaysDropUnderPartialArrivals) {
  const auto spec = desk_scenario(1, {{"task_rate", "0.3"}});
  MdpModel model(spec);
  PolicyTable drop;
  drop.actions.assign(model.n_states(), kIdle);
  const auto pv = policy_values(model, drop, 1e-12);
  const double phi = 9e-3;
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    const double now = model.space()[s].task_present ? phi : 0.0;
    EXPECT_NEAR(pv.values[s], 0.1 * now + 0.9 * 0.3 * phi, 1e-10);
  }
}

TEST(ExactSolver, TieBreakPicksLowestIndex) {
  const std::vector<double> q{3.0, 1.0, 1.0, 2.0};
  EXPECT_EQ(argmin_with_ties(q), 1u);
  const std::vector<double> near{2.0, 1.0 + 1e-15, 1.0};
  EXPECT_EQ(argmin_with_ties(near), 1u);
  const std::vector<double> inf{kInfeasibleQ, 5.0, kInfeasibleQ};
  EXPECT_EQ(argmin_with_ties(inf), 1u);
}

TEST(ExactSolver, NonConvergenceReported) {
  const auto spec = desk_scenario();
  EXPECT_THROW(value_iteration(MdpModel(spec), 1e-9, 3), ConvergenceError);
}

TEST(ExactSolver, NoArrivalsOnlyThePendingTaskCosts) {
  const auto spec = desk_scenario(1, {{"task_rate", "0"}});
  MdpModel model(spec);
  const auto vt = value_iteration(model);
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    const auto& st = model.space()[s];
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : feasible_actions(st, spec)) best = std::min(best, task_cost(st, a, spec).total_s);
    EXPECT_NEAR(vt.values[s], 0.1 * best, 1e-15);
    if (!st.task_present) {
      EXPECT_EQ(vt.values[s], 0.0);
    }
  }
}

}  // namespace
}  // namespace mecoff
