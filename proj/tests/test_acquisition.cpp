// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "prefalign/acquisition.hpp"

namespace prefalign {
namespace {

using oracle::feature_trajectory;

std::vector<double> p_first_of(const PosteriorEnsemble& e, const Query& q, double beta) {
  std::vector<double> p;
  for (const auto& w : e.samples) {
    const RewardModel r{e.family, w};
    p.push_back(oracle::p_first(beta, evaluate_reward(r, *q.first), evaluate_reward(r, *q.second)));
  }
  return p;
}

MetricMatrix constant_matrix(std::size_t m, double c) { return MetricMatrix(m, c); }

class RandomInstance : public ::testing::Test {
 protected:
  void build(std::uint64_t seed, std::size_t m, std::size_t n_traj, std::size_t d) {
    std::mt19937_64 rng(seed);
    traj = oracle::gaussian_trajectories(n_traj, d, rng);
    std::vector<std::vector<double>> s;
    for (std::size_t i = 0; i < m; ++i) s.push_back(oracle::random_unit(d, rng));
    ensemble = PosteriorEnsemble::from_samples(RewardFamily::linear_features, s);
    Rng r(seed);
    pool = build_query_pool(traj, 20, r);
    auto c = std::make_shared<AlignmentContext>();
    for (std::size_t i = 0; i + 1 < n_traj; i += 2) c->eval_queries.push_back(make_query(traj[i], traj[i + 1]));
    for (const auto& t : traj) c->eval_trajectories.push_back(&t);
    c->response_model = ResponseModel(1.5);
    context = c;
  }
  std::vector<Trajectory> traj;
  PosteriorEnsemble ensemble;
  QueryPool pool;
  std::shared_ptr<const AlignmentContext> context;
  ResponseModel rm{2.0};
};

TEST_F(RandomInstance, ConstantMetricCollapses) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    build(seed, 7, 24, 4);
    for (const Query& q : pool.candidates) {
      const ChoiceTable t = choice_table(ensemble.models(), q, rm);
      EXPECT_NEAR(score_alignment_objective(t, ensemble.weights, constant_matrix(7, -2.5)), -2.5,
                  1e-12);
    }
  }
}

TEST_F(RandomInstance, SingleSampleScoresSelfMetric) {
  build(3, 1, 20, 3);
  const AlignmentMetric m{MetricKind::loglikelihood, context};
  const double self = evaluate(m, ensemble.model(0), ensemble.model(0));
  for (const Query& q : pool.candidates) {
    EXPECT_NEAR(score_alignment_objective(q, ensemble, m, rm), self, 1e-9 * std::abs(self));
  }
}

TEST_F(RandomInstance, MatchesReweightedOracle) {
  build(11, 5, 30, 4);
  ASSERT_GE(pool.size(), 10u);
  for (MetricKind k : {MetricKind::loglikelihood, MetricKind::rho}) {
    const AlignmentMetric m{k, context};
    const auto models = ensemble.models();
    const MetricMatrix f = compute_metric_matrix(m, models);
    for (std::size_t i = 0; i < 10; ++i) {
      const Query& q = pool.candidates[i];
      const double fast = score_alignment_objective(q, ensemble, m, rm);
      const double slow = oracle::reweighted_objective(
          ensemble.weights, p_first_of(ensemble, q, rm.beta()),
          [&](std::size_t a, std::size_t b) { return evaluate(m, models[a], models[b]); });
      EXPECT_NEAR(fast, slow, 1e-10);
      (void)f;
    }
  }
}

TEST_F(RandomInstance, MutualInformationMatchesJointTable) {
  build(5, 9, 30, 3);
  for (const Query& q : pool.candidates) {
    const double mi = score_mutual_information(q, ensemble, rm);
    EXPECT_GE(mi, 0.0);
    EXPECT_LE(mi, 1.0);
    EXPECT_NEAR(mi, oracle::mutual_information_bits(ensemble.weights, p_first_of(ensemble, q, 2.0)),
                1e-12);
  }
}

TEST_F(RandomInstance, LogPosteriorScorerRanksLikeMutualInformation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    build(100 + seed, 5, 30, 3);
    std::vector<double> mi, lp;
    for (const Query& q : pool.candidates) {
      mi.push_back(score_mutual_information(q, ensemble, rm));
      lp.push_back(score_log_posterior_alignment(q, ensemble, rm));
    }
    EXPECT_EQ(oracle::kendall_tau(mi, lp, 1e-12), 1.0);
    std::size_t arg_mi = 0, arg_lp = 0;
    for (std::size_t i = 0; i < mi.size(); ++i) {
      if (mi[i] > mi[arg_mi]) arg_mi = i;
      if (lp[i] > lp[arg_lp]) arg_lp = i;
    }
    EXPECT_EQ(arg_mi, arg_lp);
  }
}

TEST_F(RandomInstance, LabelSwapLeavesScoresUnchanged) {
  build(8, 6, 24, 3);
  QueryPool swapped = pool;
  for (Query& q : swapped.candidates) q = q.swapped();
  for (PolicyKind p : {PolicyKind::mi, PolicyKind::align_ll, PolicyKind::align_rho}) {
    PolicyInputs in{&pool, {}, &ensemble, &rm, context, traj};
    PolicyInputs in_swapped{&swapped, {}, &ensemble, &rm, context, traj};
    const auto a = score_pool(p, in);
    const auto b = score_pool(p, in_swapped);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    Rng r1(1), r2(1);
    EXPECT_EQ(next_query(p, in, r1).pool_index, next_query(p, in_swapped, r2).pool_index);
  }
}

TEST(MutualInformation, AgreeingDeterministicMembersGiveZero) {
  const auto a = feature_trajectory("a", {10.0, 0.0});
  const auto b = feature_trajectory("b", {0.0, 0.0});
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features,
                                                 {{1.0, 0.0}, {0.9, 0.4}});
  EXPECT_NEAR(score_mutual_information(make_query(a, b), e, ResponseModel(100.0)), 0.0, 1e-12);
}

TEST(MutualInformation, OpposedDeterministicMembersGiveOneBit) {
  const auto a = feature_trajectory("a", {10.0, 0.0});
  const auto b = feature_trajectory("b", {0.0, 0.0});
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features,
                                                 {{1.0, 0.0}, {-1.0, 0.0}});
  EXPECT_NEAR(score_mutual_information(make_query(a, b), e, ResponseModel(100.0)), 1.0, 1e-12);
}

TEST(MutualInformation, CollapsedEnsembleIsZeroEverywhere) {
  std::mt19937_64 rng(2);
  const auto traj = oracle::gaussian_trajectories(20, 3, rng);
  const auto w = oracle::random_unit(3, rng);
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features,
                                                 std::vector<std::vector<double>>(8, w));
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    EXPECT_NEAR(score_mutual_information(make_query(traj[i], traj[i + 1]), e, ResponseModel(1.0)),
                0.0, 1e-12);
  }
}

TEST(LogPosteriorAlignment, CollapsedEnsembleTies) {
  std::mt19937_64 rng(2);
  const auto traj = oracle::gaussian_trajectories(20, 3, rng);
  const auto w = oracle::random_unit(3, rng);
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features,
                                                 std::vector<std::vector<double>>(5, w));
  const double first = score_log_posterior_alignment(make_query(traj[0], traj[1]), e, ResponseModel(1.0));
  for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
    EXPECT_NEAR(score_log_posterior_alignment(make_query(traj[i], traj[i + 1]), e, ResponseModel(1.0)),
                first, 1e-12);
  }
}

TEST(MaxRegret, CollapsedEnsembleIsDegenerate) {
  std::mt19937_64 rng(6);
  const auto traj = oracle::gaussian_trajectories(30, 3, rng);
  const auto w = oracle::random_unit(3, rng);
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features,
                                                 std::vector<std::vector<double>>(4, w));
  const auto r = select_max_regret_query(e, traj);
  EXPECT_TRUE(r.degenerate);
  const RewardModel model{RewardFamily::linear_features, w};
  std::size_t best = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (evaluate_reward(model, traj[i]) > evaluate_reward(model, traj[best])) best = i;
  }
  EXPECT_EQ(r.query.first, &traj[best]);
}

TEST(MaxRegret, DisjointOptimaAreQueried) {
  std::vector<Trajectory> traj{feature_trajectory("x", {1, 0}), feature_trajectory("y", {0, 1}),
                               feature_trajectory("z", {0.2, 0.2})};
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{1, 0}, {0, 1}});
  const auto r = select_max_regret_query(e, traj);
  EXPECT_FALSE(r.degenerate);
  const std::set<std::string> ids{r.query.first->id, r.query.second->id};
  EXPECT_EQ(ids, (std::set<std::string>{"x", "y"}));
  // Uniform weights 1/2 each: (1 - 0 + 1 - 0) / 4.
  EXPECT_NEAR(r.regret, 0.5, 1e-15);
}

TEST(MaxRegret, RegretIsAntisymmetricInTrajectoryOrder) {
  std::mt19937_64 rng(19);
  const auto traj = oracle::gaussian_trajectories(10, 3, rng);
  for (int i = 0; i < 50; ++i) {
    const RewardModel wa{RewardFamily::linear_features, oracle::random_unit(3, rng)};
    const RewardModel wb{RewardFamily::linear_features, oracle::random_unit(3, rng)};
    const Trajectory& xa = traj[i % 10];
    const Trajectory& xb = traj[(i + 3) % 10];
    auto term = [](const RewardModel& a, const RewardModel& b, const Trajectory& x, const Trajectory& y) {
      return evaluate_reward(a, x) - evaluate_reward(a, y) + evaluate_reward(b, y) - evaluate_reward(b, x);
    };
    EXPECT_NEAR(term(wa, wb, xa, xb), -term(wb, wa, xa, xb), 1e-12);
  }
}

TEST(MaxRegret, RespectsGroups) {
  std::vector<Trajectory> traj{feature_trajectory("x", {1, 0}, "g1"),
                               feature_trajectory("y", {0, 1}, "g2"),
                               feature_trajectory("x2", {0.1, 0.9}, "g1"),
                               feature_trajectory("y2", {0.9, 0.1}, "g2")};
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{1, 0}, {0, 1}});
  const auto r = select_max_regret_query(e, traj);
  EXPECT_EQ(r.query.first->group_key, r.query.second->group_key);
  EXPECT_TRUE(r.degenerate);
}

class PoolFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(1);
    traj = oracle::gaussian_trajectories(40, 2, rng);
    Rng r(3);
    pool = build_query_pool(traj, 30, r);
    ensemble = PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{1, 0}, {-1, 0}, {0, 1}});
  }
  std::vector<Trajectory> traj;
  QueryPool pool;
  PosteriorEnsemble ensemble;
  ResponseModel rm{1.0};
};

TEST_F(PoolFixture, DistinctUnorderedPairs) {
  ASSERT_EQ(pool.size(), 30u);
  std::set<std::pair<std::string, std::string>> seen;
  for (const Query& q : pool.candidates) {
    const auto key = std::minmax(q.first->id, q.second->id);
    EXPECT_TRUE(seen.insert(key).second);
  }
}

TEST_F(PoolFixture, SmallPopulationsYieldAllPairs) {
  Rng r(2);
  const std::vector<Trajectory> few(traj.begin(), traj.begin() + 5);
  EXPECT_EQ(build_query_pool(few, 200, r).size(), 10u);
}

TEST_F(PoolFixture, GroupRestricted) {
  std::vector<Trajectory> grouped = traj;
  for (std::size_t i = 0; i < grouped.size(); ++i) grouped[i].group_key = "g" + std::to_string(i / 4);
  grouped.back().group_key = "lonely";
  Rng r(4);
  const auto p = build_query_pool(grouped, 200, r);
  EXPECT_EQ(p.size(), 9u * 6u + 3u);
  for (const Query& q : p.candidates) EXPECT_EQ(q.first->group_key, q.second->group_key);
}

TEST_F(PoolFixture, RandomPolicyReproducible) {
  PolicyInputs in{&pool, {}, &ensemble, &rm, nullptr, traj};
  Rng a(5), b(5);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(next_query(PolicyKind::random, in, a).pool_index,
              next_query(PolicyKind::random, in, b).pool_index);
  }
}

TEST_F(PoolFixture, ConstantScoresPickIndexZero) {
  // A collapsed ensemble makes every pool-based score tie.
  const auto collapsed = PosteriorEnsemble::from_samples(RewardFamily::linear_features,
                                                         {{0.6, 0.8}, {0.6, 0.8}});
  auto ctx = std::make_shared<AlignmentContext>();
  for (const auto& t : traj) ctx->eval_trajectories.push_back(&t);
  PolicyInputs in{&pool, {}, &collapsed, &rm, ctx, traj};
  Rng r(1);
  EXPECT_EQ(next_query(PolicyKind::align_rho, in, r).pool_index, std::optional<std::size_t>(0));
  EXPECT_EQ(next_query(PolicyKind::mi, in, r).pool_index, std::optional<std::size_t>(0));
}

TEST(NextQuery, MutualInformationFindsTheOneBitQuery) {
  std::vector<Trajectory> traj{feature_trajectory("a", {0, 20}), feature_trajectory("b", {0, 0}),
                               feature_trajectory("c", {20, 0}), feature_trajectory("d", {0, 0.1})};
  QueryPool pool{{make_query(traj[0], traj[1]), make_query(traj[2], traj[1]), make_query(traj[0], traj[3])}};
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{1, 0}, {-1, 0}});
  ResponseModel rm(10.0);
  PolicyInputs in{&pool, {}, &e, &rm, nullptr, traj};
  Rng r(0);
  const Selection s = next_query(PolicyKind::mi, in, r);
  EXPECT_EQ(s.pool_index, std::optional<std::size_t>(1));
  EXPECT_NEAR(s.score, 1.0, 1e-9);
}

TEST_F(PoolFixture, AskedQueriesAreSkippedUntilExhausted) {
  std::vector<unsigned char> asked(pool.size(), 0);
  PolicyInputs in{&pool, asked, &ensemble, &rm, nullptr, traj};
  Rng r(0);
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Selection s = next_query(PolicyKind::mi, in, r);
    ASSERT_TRUE(s.pool_index);
    EXPECT_TRUE(seen.insert(*s.pool_index).second);
    asked[*s.pool_index] = 1;
  }
  EXPECT_THROW(next_query(PolicyKind::mi, in, r), Exhausted);
  EXPECT_THROW(next_query(PolicyKind::random, in, r), Exhausted);
}

TEST(NextQuery, EmptyPoolIsExhausted) {
  QueryPool pool;
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{1.0}});
  ResponseModel rm(1.0);
  PolicyInputs in{&pool, {}, &e, &rm, nullptr, {}};
  Rng r(0);
  EXPECT_THROW(next_query(PolicyKind::random, in, r), Exhausted);
}

TEST(PolicyNames, RoundTrip) {
  for (PolicyKind p : kAllPolicies) EXPECT_EQ(parse_policy(to_string(p)), p);
  try {
    parse_policy("greedy-ish");
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("greedy-ish"), std::string::npos);
  }
}

}  // namespace
}  // namespace prefalign
