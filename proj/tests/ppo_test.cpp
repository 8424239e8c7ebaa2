#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "nrumac/ppo.hpp"
#include "support/ppo_fixtures.hpp"

using namespace nrumac;
using namespace nrumac::fixtures;

TEST(Advantages, Examples) {
  const auto a = compute_advantages({1, 1, 1}, {0, 0, 0}, 0.5);
  EXPECT_NEAR(a.returns[0], 1.75, 1e-12);
  EXPECT_NEAR(a.returns[1], 1.5, 1e-12);
  EXPECT_NEAR(a.returns[2], 1.0, 1e-12);
  EXPECT_EQ(a.advantages, a.returns);
  const auto b = compute_advantages({1, 2, 3}, {1.0 + 0.9 * (2 + 0.9 * 3), 2 + 0.9 * 3, 3}, 0.9);
  for (double x : b.advantages) EXPECT_NEAR(x, 0.0, 1e-12);
  const auto c = compute_advantages({4, -1, 2}, {0, 0, 0}, 0.0);
  EXPECT_EQ(c.returns, (std::vector<double>{4, -1, 2}));
  EXPECT_THROW(compute_advantages({}, {}, 0.9), ConfigError);
  EXPECT_THROW(compute_advantages({1}, {1, 2}, 0.9), ConfigError);
}

TEST(Advantages, MatchBruteForceOracle) {
  Rng rng(1);
  std::normal_distribution<double> g(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 1 + rng() % 60;
    const double gamma = 0.5 + 0.5 * uniform01(rng);
    std::vector<double> r(T), v(T);
    for (auto& x : r) x = g(rng);
    for (auto& x : v) x = g(rng);
    const auto a = compute_advantages(r, v, gamma);
    for (std::size_t t = 0; t < T; ++t) {
      double G = 0;
      for (std::size_t k = t; k < T; ++k) G += std::pow(gamma, static_cast<double>(k - t)) * r[k];
      EXPECT_NEAR(a.returns[t], G, 1e-9 * (1 + std::abs(G)));
      EXPECT_NEAR(a.advantages[t], G - v[t], 1e-9 * (1 + std::abs(G)));
    }
  }
}

TEST(Advantages, StandardizedMoments) {
  Rng rng(2);
  std::normal_distribution<double> g(3, 7);
  std::vector<double> r(200), v(200, 0.0);
  for (auto& x : r) x = g(rng);
  const auto a = compute_advantages(r, v, 0.9, true);
  double m = 0, s = 0;
  for (double x : a.advantages) m += x;
  m /= 200;
  for (double x : a.advantages) s += (x - m) * (x - m);
  EXPECT_LT(std::abs(m), 1e-9);
  EXPECT_NEAR(s / 200, 1.0, 1e-9);
  // Constant advantages are only centred.
  std::vector<double> flat(5, 2.0);
  standardize(flat);
  for (double x : flat) EXPECT_EQ(x, 0.0);
}

TEST(ValueLoss, Examples) {
  EXPECT_NEAR(value_loss({2}, {1}), 0.5, 1e-12);
  EXPECT_EQ(value_loss({1, 2}, {1, 2}), 0.0);
  EXPECT_NEAR(value_loss({1, 3}, {0, 0}), 2.5, 1e-12);
}

TEST(Ratio, Examples) {
  EXPECT_EQ(policy_ratio(-1.3, -1.3), 1.0);
  EXPECT_NEAR(policy_ratio(-1.0 + std::log(2.0), -1.0), 2.0, 1e-12);
  EXPECT_NEAR(policy_ratio(0.0, -100.0), kMaxRatio, 1e-3);
}

TEST(Surrogate, Examples) {
  EXPECT_NEAR(clipped_surrogate({1.0}, {1.0}, {0.0}, 0.2, 0.0), -1.0, 1e-12);
  EXPECT_NEAR(clipped_surrogate({1.5}, {1.0}, {0.0}, 0.2, 0.0), -1.2, 1e-12);
  EXPECT_NEAR(clipped_surrogate({0.5}, {-1.0}, {0.0}, 0.2, 0.0), 0.8, 1e-12);
  EXPECT_NEAR(clipped_surrogate({1.0, 1.0}, {1.0, 1.0}, {2.0, 0.0}, 0.2, 0.5), -1.5, 1e-12);
}

TEST(Surrogate, WideClipEqualsVanillaGradient) {
  Rng rng(3);
  std::normal_distribution<double> g(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double r = std::exp(g(rng)), A = g(rng);
    EXPECT_DOUBLE_EQ(clipped_term_grad(r, A, 1e9), -A * r);
  }
}

TEST(Surrogate, GradientMatchesFiniteDifference) {
  Rng rng(4);
  std::normal_distribution<double> g(0, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const double lp = g(rng), A = g(rng) * 3;
    const double r = std::exp(lp);
    // skip the kinks of the clip
    if (std::abs(r - 0.8) < 1e-4 || std::abs(r - 1.2) < 1e-4) continue;
    const double h = 1e-6;
    const double num = (clipped_term(std::exp(lp + h), A, 0.2) - clipped_term(std::exp(lp - h), A, 0.2)) / (2 * h);
    EXPECT_NEAR(clipped_term_grad(r, A, 0.2), num, 1e-6);
  }
}

TEST(Learner, FirstMinibatchRatiosAreOne) {
  PpoConfig c = bandit_config();
  Learner l(1, {2, 3}, c, 7, 0);
  const Trajectory tr = bandit_rollout(l, 4, 13);
  const TrainStats s = l.train(tr);
  EXPECT_LT(s.first_ratio_deviation, 1e-9);
  EXPECT_TRUE(std::isfinite(s.policy_loss));
}

TEST(Learner, BanditConverges) {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Learner l(1, {2}, bandit_config(), seed, 0);
    for (int it = 0; it < 50; ++it) l.train(bandit_rollout(l, 100, 1));
    ok += prob_arm0(l) > 0.95;
  }
  EXPECT_GE(ok, 2);
}

TEST(Learner, ZeroRewardKeepsEntropy) {
  Learner l(1, {4, 4}, bandit_config(), 5, 0);
  const Trajectory first = bandit_rollout(l, 10, 10, 0.0);
  const double h0 = l.train(first).entropy;
  double h = h0;
  for (int it = 1; it < 10; ++it) h = l.train(bandit_rollout(l, 10, 10, 0.0)).entropy;
  EXPECT_NEAR(h, h0, 0.1 * h0);
}

TEST(Learner, SmallBatchFallsBackToFullBatch) {
  PpoConfig c = bandit_config();
  c.minibatch_size = 1000;
  Learner l(1, {2}, c, 5, 0);
  EXPECT_TRUE(l.train(bandit_rollout(l, 2, 10)).full_batch);
}

TEST(Learner, SerializationRoundTrip) {
  Learner a(1, {2, 3}, bandit_config(), 11, 0);
  a.train(bandit_rollout(a, 3, 10));
  std::stringstream ss;
  a.save(ss);
  Learner b(1, {2, 3}, bandit_config(), 999, 0);
  b.load(ss);
  a.reset_hidden();
  const Trajectory ta = bandit_rollout(a, 3, 10), tb = bandit_rollout(b, 3, 10);
  const TrainStats sa = a.train(ta), sb = b.train(tb);
  EXPECT_EQ(sa.policy_loss, sb.policy_loss);
  EXPECT_EQ(a.policy().params, b.policy().params);
  EXPECT_EQ(a.value().params, b.value().params);
}

TEST(Learner, IndependentOfOtherLearners) {
  Learner a(1, {2}, bandit_config(), 1, 0);
  Learner b(1, {2}, bandit_config(), 1, 1);
  const Trajectory tr = bandit_rollout(a, 3, 10);
  Learner a2 = a;
  a.train(tr);
  b.mutable_policy().params.setConstant(3.0);
  a2.train(tr);
  EXPECT_EQ(a.policy().params, a2.policy().params);
}

TEST(Training, DtdeIsDeterministic) {
  const auto a = run_dtde(tiny_scenario(2), tiny_config(), 3);
  const auto b = run_dtde(tiny_scenario(2), tiny_config(), 3);
  ASSERT_EQ(a.curve.size(), 6u);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].mean_reward, b.curve[i].mean_reward);
    EXPECT_EQ(a.curve[i].policy_loss, b.curve[i].policy_loss);
  }
}

TEST(Training, SingleGnbCtceEqualsDtde) {
  const auto d = run_dtde(tiny_scenario(1), tiny_config(), 8);
  const auto c = run_ctce(tiny_scenario(1), tiny_config(), 8);
  ASSERT_EQ(d.curve.size(), c.curve.size());
  for (std::size_t i = 0; i < d.curve.size(); ++i) {
    EXPECT_EQ(d.curve[i].mean_reward, c.curve[i].mean_reward);
    EXPECT_EQ(d.curve[i].value_loss, c.curve[i].value_loss);
  }
  EXPECT_EQ(d.learners[0].policy().params, c.learners[0].policy().params);
}

TEST(Training, CtceHeadCount) {
  ScenarioConfig s = tiny_scenario(6);
  s.area_m = 200;
  PpoConfig c = tiny_config();
  Trainer t(s, c, Algo::ctce, 1);
  ASSERT_EQ(t.learners().size(), 1u);
  EXPECT_EQ(t.learners()[0].policy().spec().heads.size(), 48u);
  EXPECT_EQ(t.learners()[0].policy().spec().input, 6 * kObsDim);
  Trainer d(s, c, Algo::dtde, 1);
  EXPECT_EQ(d.learners().size(), 6u);
}

TEST(Training, ResumeMatchesUninterrupted) {
  const ScenarioConfig s = tiny_scenario(2);
  const PpoConfig c = tiny_config();
  Trainer full(s, c, Algo::dtde, 21);
  std::vector<CurveRow> rows_full;
  for (int k = 0; k < 3; ++k) {
    auto r = full.run_iteration();
    rows_full.insert(rows_full.end(), r.begin(), r.end());
  }
  Trainer first(s, c, Algo::dtde, 21);
  std::vector<CurveRow> rows;
  for (int k = 0; k < 2; ++k) {
    auto r = first.run_iteration();
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::stringstream ck;
  first.save(ck);
  Trainer resumed(s, c, Algo::dtde, 21);
  resumed.load(ck);
  EXPECT_EQ(resumed.iteration(), 2);
  auto r = resumed.run_iteration();
  rows.insert(rows.end(), r.begin(), r.end());
  ASSERT_EQ(rows.size(), rows_full.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].mean_reward, rows_full[i].mean_reward);
  EXPECT_EQ(resumed.learners()[1].policy().params, full.learners()[1].policy().params);
}

namespace {

ScenarioConfig contended(int n, std::uint64_t seed) {
  ScenarioConfig s;
  s.num_gnbs = n;
  s.area_m = 40;
  s.traffic.lambda_range = std::make_pair(1000.0, 3000.0);
  s.episode_s = 20;
  s.seed = seed;
  return s;
}

PpoConfig short_horizon(int iterations) {
  PpoConfig c;
  c.gamma = 0.5;
  c.hidden = 16;
  c.minibatch_size = 50;
  c.iterations = iterations;
  return c;
}

double ols_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

}  // namespace

TEST(Training, SingleGnbRewardTrendsUp) {
  std::vector<double> slopes;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    slopes.push_back(ols_slope(mean_reward_curve(run_dtde(contended(1, seed), short_horizon(30), seed).curve)));
  }
  EXPECT_GE(median3(slopes), 0.0) << slopes[0] << " " << slopes[1] << " " << slopes[2];
}

TEST(Training, TwoGnbsLearnUnderHighLoad) {
  std::vector<double> gain;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = mean_reward_curve(run_dtde(contended(2, seed), short_horizon(30), seed).curve);
    gain.push_back(r.back() - r.front());
  }
  EXPECT_GT(median3(gain), 0.0) << gain[0] << " " << gain[1] << " " << gain[2];
}
