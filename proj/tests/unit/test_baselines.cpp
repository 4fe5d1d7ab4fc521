#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sgcrl/baselines.hpp"

namespace {

using namespace sgcrl;

SparseModel deterministic_model(const std::vector<std::vector<int>>& next,
                                const std::vector<std::vector<double>>& reward) {
  SparseModel m;
  m.num_states = static_cast<int>(next.size());
  m.num_actions = static_cast<int>(next[0].size());
  for (std::size_t s = 0; s < next.size(); ++s)
    for (std::size_t a = 0; a < next[s].size(); ++a) {
      m.rows.push_back({{next[s][a], 1.0}});
      m.reward.push_back(reward[s][a]);
    }
  return m;
}

// 0 -> 1 -> 2 (goal, absorbing); the goal pays 1 per step.
TabularEnv line3() { return TabularEnv("line3", 3, 2, 0, 2, {0, 1, 0, 2, 2, 2}); }

TEST(ValueIteration, AbsorbingRewardIsGeometricSeries) {
  const auto m = deterministic_model({{0}}, {{1.0}});
  const auto vt = value_iteration(m, 0.99, 1e-10);
  EXPECT_NEAR(vt.v[0], 100.0, 1e-6);
}

TEST(ValueIteration, ZeroRewardGivesZeroValues) {
  const auto m = deterministic_model({{1, 2}, {0, 2}, {2, 0}}, {{0, 0}, {0, 0}, {0, 0}});
  for (double v : value_iteration(m, 0.9).v) EXPECT_EQ(v, 0.0);
}

TEST(ValueIteration, ChainMatchesClosedForm) {
  // Optimal path 0 -> 1 -> 2 then stay: V2 = 1/(1-g), V1 = g V2, V0 = g^2 V2.
  const double g = 0.9;
  const auto m = deterministic_model({{0, 1}, {0, 2}, {2, 2}}, {{0, 0}, {0, 0}, {1, 1}});
  const auto vt = value_iteration(m, g, 1e-12);
  const double v2 = 1.0 / (1.0 - g);
  EXPECT_NEAR(vt.v[2], v2, 1e-8);
  EXPECT_NEAR(vt.v[1], g * v2, 1e-8);
  EXPECT_NEAR(vt.v[0], g * g * v2, 1e-8);
  EXPECT_EQ(vt.policy[0], 1);
  EXPECT_EQ(vt.policy[1], 1);
}

TEST(ValueIteration, AgreesWithExhaustivePolicySearch) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int S = 2 + trial % 5;
    const int A = 2 + trial % 2;
    std::uniform_int_distribution<int> pick(0, S - 1);
    std::vector<std::vector<int>> next(S, std::vector<int>(A));
    std::vector<std::vector<double>> reward(S, std::vector<double>(A));
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        next[s][a] = pick(rng);
        reward[s][a] = gauss(rng);
      }
    const double gamma = 0.8;
    const auto vt = value_iteration(deterministic_model(next, reward), gamma, 1e-12);
    const auto ref = oracle::brute_force_values(next, reward, gamma);
    for (int s = 0; s < S; ++s) EXPECT_NEAR(vt.v[s], ref[s], 1e-8) << "trial " << trial;
  }
}

TEST(ValueIteration, RejectsNonStochasticRows) {
  auto m = deterministic_model({{0}}, {{1.0}});
  m.rows[0][0].second = 0.7;
  EXPECT_THROW(value_iteration(m, 0.9), ConfigError);
  EXPECT_THROW(value_iteration(deterministic_model({{0}}, {{1.0}}), 1.0), ConfigError);
}

TEST(Rmax, OptimisticBeforeAnyExperience) {
  const auto env = make_fourrooms(7);
  RmaxAgent agent(env, RmaxConfig{});
  EXPECT_EQ(agent.num_known(), 0u);
  for (double q : agent.values().q) EXPECT_NEAR(q, agent.v_max(), 1e-6);
}

TEST(Rmax, OneVisitMakesAPairKnownWithItsTransition) {
  const auto env = line3();
  RmaxAgent agent(env, RmaxConfig{});
  Trajectory t;
  t.states = {0, 1};
  t.actions = {1};
  agent.observe(t);
  EXPECT_TRUE(agent.known(0, 1));
  EXPECT_FALSE(agent.known(0, 0));
  const auto& row = agent.model().rows[agent.model().index(0, 1)];
  ASSERT_EQ(row.size(), 1u);
  EXPECT_EQ(row[0].first, 1);
  EXPECT_EQ(row[0].second, 1.0);
}

TEST(Rmax, OptimismBoundAndMonotoneKnowledge) {
  const auto env = make_fourrooms(7);
  RmaxConfig cfg;
  cfg.episode.max_steps = 50;
  RmaxAgent agent(env, cfg);
  std::size_t known = 0;
  for (int e = 0; e < 40; ++e) {
    agent.observe(agent.collect());
    ASSERT_GE(agent.num_known(), known);
    known = agent.num_known();
    for (double q : agent.values().q) ASSERT_LE(q, agent.v_max() + 1e-6);
    for (StateId s = 0; s < env.num_states(); ++s)
      for (ActionId a = 0; a < env.num_actions(); ++a)
        if (!agent.known(s, a))
          ASSERT_NEAR(agent.values().q[agent.model().index(s, a)], agent.v_max(), 1e-5);
  }
}

TEST(Rmax, FindsTheGoalThenSettlesOnIt) {
  // Optimism keeps it wandering for a while after the first success; once
  // every reachable pair is known the greedy path is fixed.
  const auto env = make_fourrooms(11);
  RmaxAgent agent(env, RmaxConfig{});
  int first = -1;
  for (int e = 0; e < 400; ++e) {
    const auto traj = agent.collect();
    agent.observe(traj);
    if (first < 0 && traj.success) first = e;
    if (e >= 300) ASSERT_TRUE(traj.success) << "episode " << e;
  }
  EXPECT_GE(first, 0);
}

TEST(Psrl, SampledRowsAreDistributions) {
  const auto env = make_fourrooms(7);
  PsrlAgent agent(env, PsrlConfig{}, 3);
  Rng rng = make_rng(1);
  const auto m = agent.sample_model(rng);
  EXPECT_NO_THROW(m.validate());
  for (const auto& row : m.rows) {
    double sum = 0.0;
    for (const auto& [t, p] : row) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Psrl, PosteriorMassOnObservedSuccessor) {
  const auto env = line3();
  PsrlConfig cfg;
  cfg.prior = 1.0;
  PsrlAgent agent(env, cfg, 3);
  Trajectory t;
  t.states = {0};
  t.actions = {};
  for (int i = 0; i < 100; ++i) {
    t.states.push_back(i % 2 == 0 ? 1 : 0);
    t.actions.push_back(i % 2 == 0 ? 1 : 0);
  }
  agent.observe(t);
  EXPECT_EQ(agent.pseudo_count(0, 1, 1), 51.0);
  // 50 observations of 0 -(1)-> 1 over 3 candidate successors: mean 51/53.
  Rng rng = make_rng(2);
  double mass = 0.0;
  const int draws = 2000;
  for (int k = 0; k < draws; ++k) {
    const auto m = agent.sample_model(rng);
    for (const auto& [s, p] : m.rows[m.index(0, 1)])
      if (s == 1) mass += p;
  }
  EXPECT_NEAR(mass / draws, 51.0 / 53.0, 0.01);
  EXPECT_GT(mass / draws, 0.95);
}

TEST(Psrl, PriorIsUniformInExpectation) {
  const auto env = make_fourrooms(7);
  PsrlConfig cfg;
  cfg.prior = 1.0;
  PsrlAgent agent(env, cfg, 3);
  Rng rng = make_rng(5);
  const int S = env.num_states();
  std::vector<double> mean(S, 0.0);
  const int draws = 400;
  for (int k = 0; k < draws; ++k) {
    const auto m = agent.sample_model(rng);
    for (const auto& [s, p] : m.rows[m.index(env.start(), 0)]) mean[s] += p / draws;
  }
  // Each marginal is Beta(1, S - 1): sd of the mean = sqrt((S-1)/(S^2 (S+1) draws)).
  const double se = std::sqrt((S - 1.0) / (S * S * (S + 1.0) * draws));
  for (double m : mean) EXPECT_NEAR(m, 1.0 / S, 5.0 * se);
}

TEST(Psrl, ReachesTheGoalOnSmallRooms) {
  const auto env = make_fourrooms(7);
  PsrlAgent agent(env, PsrlConfig{}, 11);
  int late = 0;
  for (int e = 0; e < 200; ++e) {
    const auto traj = agent.collect();
    agent.observe(traj);
    if (e >= 150) late += traj.success;
  }
  EXPECT_GE(late, 45);
}

TEST(Psrl, RejectsNonPositivePrior) {
  const auto env = line3();
  PsrlConfig cfg;
  cfg.prior = 0.0;
  EXPECT_THROW(PsrlAgent(env, cfg, 1), ConfigError);
}

}  // namespace
