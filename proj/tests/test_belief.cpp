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
#include <vector>

#include "oracles.hpp"
#include "prefalign/belief.hpp"

namespace prefalign {
namespace {

using oracle::feature_trajectory;

SamplerSettings quick(std::size_t m = 100, std::size_t thinning = 20) {
  SamplerSettings s;
  s.burn_in = 500;
  s.num_samples = m;
  s.thinning = thinning;
  return s;
}

TEST(Prior, UnitBallDensityIsNormalized) {
  // Volume of the unit disk is pi, of the unit 3-ball 4pi/3.
  const auto p2 = Prior::unit_ball(RewardFamily::linear_features, 2);
  EXPECT_NEAR(p2.log_density(std::vector<double>{0.1, 0.2}), -std::log(M_PI), 1e-12);
  const auto p3 = Prior::unit_ball(RewardFamily::linear_features, 3);
  EXPECT_NEAR(p3.log_density(std::vector<double>{0, 0, 0}), -std::log(4.0 * M_PI / 3.0), 1e-12);
  EXPECT_EQ(p2.log_density(std::vector<double>{1.0, 0.5}), -INFINITY);
}

TEST(Prior, BoxDensity) {
  const auto p = Prior::box(RewardFamily::goal_distance, {0, 0, 0}, {2, 1, 0.5});
  EXPECT_NEAR(p.log_density(std::vector<double>{1, 0.5, 0.25}), 0.0, 1e-12);
  EXPECT_EQ(p.log_density(std::vector<double>{1, 1.5, 0.25}), -INFINITY);
  EXPECT_THROW(Prior::box(RewardFamily::goal_distance, {0, 0, 0}, {1, 0, 1}), InvalidInput);
}

class LogPosteriorFixture : public ::testing::Test {
 protected:
  Trajectory a = feature_trajectory("a", {1.0, 0.0});
  Trajectory b = feature_trajectory("b", {0.0, 1.0});
  Trajectory c = feature_trajectory("c", {1.0, 1.0});
  Trajectory d = feature_trajectory("d", {1.0, 1.0});
  Prior prior = Prior::unit_ball(RewardFamily::linear_features, 2);
  ResponseModel rm{2.0};
};

TEST_F(LogPosteriorFixture, EmptyDatasetIsPrior) {
  const std::vector<double> w{0.3, -0.4};
  EXPECT_DOUBLE_EQ(log_posterior(w, {}, prior, rm), prior.log_density(w));
}

TEST_F(LogPosteriorFixture, EqualRewardQueryAddsLogHalf) {
  PreferenceDataset data;
  data.append(make_response(make_query(c, d), 0, Annotator::human, 0));
  const std::vector<double> w{0.3, -0.4};
  EXPECT_NEAR(log_posterior(w, data, prior, rm), prior.log_density(w) + std::log(0.5), 1e-14);
}

TEST_F(LogPosteriorFixture, OffSupportIsMinusInfinity) {
  EXPECT_EQ(log_posterior(std::vector<double>{2.0, 0.0}, {}, prior, rm), -INFINITY);
}

TEST_F(LogPosteriorFixture, TwoPointGridRatioMatchesHandLikelihood) {
  PreferenceDataset data;
  data.append(make_response(make_query(a, b), 0, Annotator::human, 0));
  data.append(make_response(make_query(a, c), 1, Annotator::human, 0));
  const std::vector<double> w1{0.6, 0.0};
  const std::vector<double> w2{0.0, 0.6};
  // Hand values: under w1 rewards (a,b,c) = (0.6, 0, 0.6); under w2 = (0, 0.6, 0.6).
  const double l1 = std::log(oracle::p_first(2.0, 0.6, 0.0)) + std::log(0.5);
  const double l2 = std::log(oracle::p_first(2.0, 0.0, 0.6)) +
                    std::log(1.0 - oracle::p_first(2.0, 0.0, 0.6));
  const double ratio = log_posterior(w1, data, prior, rm) - log_posterior(w2, data, prior, rm);
  EXPECT_NEAR(ratio, l1 - l2, 1e-12);
}

TEST_F(LogPosteriorFixture, UninformativeQueryLeavesRatiosUnchanged) {
  PreferenceDataset base;
  base.append(make_response(make_query(a, b), 0, Annotator::human, 0));
  PreferenceDataset more = base;
  more.append(make_response(make_query(c, d), 1, Annotator::human, 0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> w1{u(rng), u(rng)};
    const std::vector<double> w2{u(rng), u(rng)};
    EXPECT_NEAR(log_posterior(w1, base, prior, rm) - log_posterior(w2, base, prior, rm),
                log_posterior(w1, more, prior, rm) - log_posterior(w2, more, prior, rm), 1e-12);
  }
}

TEST_F(LogPosteriorFixture, LikelihoodMonotonicity) {
  const std::vector<double> w{0.8, 0.1};  // prefers a over b
  PreferenceDataset agree, disagree;
  agree.append(make_response(make_query(a, b), 0, Annotator::human, 0));
  disagree.append(make_response(make_query(a, b), 1, Annotator::human, 0));
  EXPECT_GT(log_posterior(w, agree, prior, rm), log_posterior(w, disagree, prior, rm));
}

TEST(SamplePosterior, EmptyDatasetDirectionsAreUniform) {
  const auto prior = Prior::unit_ball(RewardFamily::linear_features, 5);
  const auto e = sample_posterior({}, prior, ResponseModel(1.0), quick(1000, 20), 3);
  ASSERT_EQ(e.size(), 1000u);
  std::vector<double> mean(5, 0.0);
  for (const auto& s : e.samples) {
    EXPECT_NEAR(numeric::norm(s), 1.0, 1e-12);
    for (std::size_t i = 0; i < 5; ++i) mean[i] += s[i] / 1000.0;
  }
  EXPECT_LT(numeric::norm(mean), 0.1);
}

TEST(SamplePosterior, InformativeDatasetRecoversTruth) {
  std::mt19937_64 rng(8);
  const std::size_t d = 4;
  const auto traj = oracle::gaussian_trajectories(100, d, rng);
  const auto w_star = oracle::random_unit(d, rng);
  const RewardModel truth{RewardFamily::linear_features, w_star};
  PreferenceDataset data;
  for (std::size_t i = 0; i < 50; ++i) {
    const Query q = make_query(traj[2 * i], traj[2 * i + 1]);
    const int choice =
        evaluate_reward(truth, *q.first) >= evaluate_reward(truth, *q.second) ? 0 : 1;
    data.append(make_response(q, choice, Annotator::simulated, 0));
  }
  const auto prior = Prior::unit_ball(RewardFamily::linear_features, d);
  const auto e = sample_posterior(data, prior, ResponseModel(20.0), quick(), 5);
  double cos = 0.0;
  for (const auto& s : e.samples) cos += numeric::dot(s, w_star) / e.size();
  EXPECT_GT(cos, 0.8);
  const MeanReward mean = posterior_mean_reward(e);
  EXPECT_FALSE(mean.degenerate);
  EXPECT_GT(numeric::dot(mean.model.params, w_star), 0.8);
}

TEST(SamplePosterior, DeterministicForSeed) {
  const auto prior = Prior::box(RewardFamily::goal_distance, {0, 0, 0}, {1, 1, 1});
  const auto a = sample_posterior({}, prior, ResponseModel(1.0), quick(20, 5), 77);
  const auto b = sample_posterior({}, prior, ResponseModel(1.0), quick(20, 5), 77);
  const auto c = sample_posterior({}, prior, ResponseModel(1.0), quick(20, 5), 78);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST(SamplePosterior, SamplesStayInSupportAndRecordProvenance) {
  const auto prior = Prior::box(RewardFamily::goal_distance, {0, -1, 2}, {1, 1, 3});
  SamplerSettings s = quick(50, 5);
  const auto e = sample_posterior({}, prior, ResponseModel(1.0), s, 12);
  for (const auto& w : e.samples) EXPECT_TRUE(prior.contains(w));
  double total = 0.0;
  for (double w : e.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(e.provenance.seed, 12u);
  EXPECT_EQ(e.provenance.dataset_size, 0u);
  EXPECT_EQ(e.provenance.settings.thinning, 5u);
  EXPECT_GT(e.provenance.acceptance_rate, 0.05);
  EXPECT_TRUE(e.provenance.warning.empty());
}

TEST(SamplePosterior, PoorMixingAttachesWarning) {
  const auto prior = Prior::unit_ball(RewardFamily::linear_features, 2);
  SamplerSettings s = quick(20, 5);
  s.adapt = false;
  s.proposal_scale = 50.0;
  const auto e = sample_posterior({}, prior, ResponseModel(1.0), s, 1);
  EXPECT_FALSE(e.provenance.warning.empty());
}

TEST(SamplePosterior, RejectsInvalidSettings) {
  const auto prior = Prior::unit_ball(RewardFamily::linear_features, 2);
  SamplerSettings s;
  s.num_samples = 0;
  EXPECT_THROW(sample_posterior({}, prior, ResponseModel(1.0), s, 1), InvalidInput);
}

TEST(SamplePosterior, MatchesGridPosteriorMarginals) {
  // Linear reward on a 2-D box (no projection) so the grid is exact.
  std::mt19937_64 rng(31);
  const auto traj = oracle::gaussian_trajectories(16, 2, rng);
  const RewardModel truth{RewardFamily::linear_features, {0.6, -0.3}};
  const double beta = 3.0;
  PreferenceDataset data;
  Rng responder(2);
  for (std::size_t i = 0; i < 8; ++i) {
    const Query q = make_query(traj[2 * i], traj[2 * i + 1]);
    data.append(simulate_response(ResponseModel(beta), truth, q, responder));
  }
  const auto prior = Prior::box(RewardFamily::linear_features, {-1, -1}, {1, 1});
  SamplerSettings s;
  s.num_samples = 5000;
  s.thinning = 20;
  const auto e = sample_posterior(data, prior, ResponseModel(beta), s, 4);
  const auto grid = oracle::linear_grid_posterior(data, beta, -1, 1, 50);
  EXPECT_LE(oracle::total_variation(oracle::histogram(e.samples, 0, -1, 1, 50), grid.x), 0.1);
  EXPECT_LE(oracle::total_variation(oracle::histogram(e.samples, 1, -1, 1, 50), grid.y), 0.1);
}

TEST(PosteriorMean, SingleSample) {
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{0.6, 0.8}});
  const auto m = posterior_mean_reward(e);
  EXPECT_EQ(m.model.params, (std::vector<double>{0.6, 0.8}));
  EXPECT_FALSE(m.degenerate);
}

TEST(PosteriorMean, AntipodalFallsBackWithFlag) {
  const auto e =
      PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{1, 0}, {-1, 0}});
  const auto m = posterior_mean_reward(e);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.model.params, (std::vector<double>{1, 0}));
}

TEST(PosteriorMean, GoalMeanIsNotRenormalized) {
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::goal_distance,
                                                 {{0, 0, 0}, {1, 2, 4}});
  EXPECT_EQ(posterior_mean_reward(e).model.params, (std::vector<double>{0.5, 1, 2}));
}

TEST(EnsembleSpread, CollapsedIsZero) {
  const auto e = PosteriorEnsemble::from_samples(RewardFamily::linear_features,
                                                 {{1, 0}, {1, 0}, {1, 0}});
  EXPECT_EQ(ensemble_spread(e), 0.0);
  const auto f = PosteriorEnsemble::from_samples(RewardFamily::linear_features, {{1, 0}, {0, 1}});
  EXPECT_NEAR(ensemble_spread(f), std::sqrt(2.0), 1e-15);
}

}  // namespace
}  // namespace prefalign
