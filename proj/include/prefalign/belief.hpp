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

// Bayesian inference over reward parameters: priors, the unnormalized
// log-posterior under Boltzmann-rational responses, and a random-walk
// Metropolis-Hastings sampler producing the posterior ensemble.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "prefalign/error.hpp"
#include "prefalign/numeric.hpp"
#include "prefalign/rewards.hpp"

namespace prefalign {

enum class Support { unit_ball, box };

struct Prior {
  RewardFamily family = RewardFamily::linear_features;
  Support support = Support::unit_ball;
  std::size_t dim = 0;
  std::vector<double> lo;  // box only
  std::vector<double> hi;

  static Prior unit_ball(RewardFamily family, std::size_t dim) {
    if (dim == 0) throw InvalidInput("prior dimension must be positive");
    return Prior{family, Support::unit_ball, dim, {}, {}};
  }

  static Prior box(RewardFamily family, std::vector<double> lo,
                   std::vector<double> hi) {
    if (lo.empty() || lo.size() != hi.size()) {
      throw InvalidInput("box prior bounds must be non-empty and match");
    }
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!(hi[i] > lo[i])) throw InvalidInput("box prior is degenerate");
    }
    const std::size_t d = lo.size();
    return Prior{family, Support::box, d, std::move(lo), std::move(hi)};
  }

  bool contains(std::span<const double> w) const {
    if (w.size() != dim) return false;
    if (support == Support::unit_ball) return numeric::dot(w, w) <= 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      if (w[i] < lo[i] || w[i] > hi[i]) return false;
    }
    return true;
  }

  // Normalized uniform density on the support.
  double log_density(std::span<const double> w) const {
    if (!contains(w)) return -std::numeric_limits<double>::infinity();
    if (support == Support::unit_ball) {
      const double d = static_cast<double>(dim);
      return std::lgamma(0.5 * d + 1.0) - 0.5 * d * std::log(M_PI);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s -= std::log(hi[i] - lo[i]);
    return s;
  }

  std::vector<double> initial_point() const {
    if (support == Support::unit_ball) return std::vector<double>(dim, 0.0);
    std::vector<double> c(dim);
    for (std::size_t i = 0; i < dim; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }

  // Linear weights sampled on the ball are reported on the unit sphere.
  bool projects_to_sphere() const {
    return family == RewardFamily::linear_features &&
           support == Support::unit_ball;
  }
};

inline double log_likelihood(const RewardModel& reward,
                             const PreferenceDataset& data,
                             const ResponseModel& response_model) {
  double s = 0.0;
  for (const Response& r : data) {
    s += response_model.log_choice_probability(
        evaluate_reward(reward, r.chosen()),
        evaluate_reward(reward, r.rejected()));
  }
  return s;
}

// log p(w) + sum_k log P(q_k | Q_k, R_w), unnormalized; -inf off support.
inline double log_posterior(std::span<const double> w,
                            const PreferenceDataset& data, const Prior& prior,
                            const ResponseModel& response_model) {
  const double lp = prior.log_density(w);
  if (!std::isfinite(lp)) return lp;
  const RewardModel reward{prior.family, {w.begin(), w.end()}};
  return lp + log_likelihood(reward, data, response_model);
}

struct SamplerSettings {
  std::size_t burn_in = 1000;
  std::size_t num_samples = 100;
  std::size_t thinning = 200;
  double proposal_scale = 0.1;
  double target_acceptance = 0.3;
  bool adapt = true;
};

struct EnsembleProvenance {
  std::size_t dataset_size = 0;
  std::uint64_t seed = 0;
  SamplerSettings settings;
  double acceptance_rate = 0.0;
  double final_proposal_scale = 0.0;
  std::string warning;
};

struct PosteriorEnsemble {
  RewardFamily family = RewardFamily::linear_features;
  std::vector<std::vector<double>> samples;
  std::vector<double> weights;
  EnsembleProvenance provenance;

  std::size_t size() const { return samples.size(); }
  RewardModel model(std::size_t i) const { return {family, samples[i]}; }
  std::vector<RewardModel> models() const {
    std::vector<RewardModel> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({family, s});
    return out;
  }

  static PosteriorEnsemble from_samples(RewardFamily family,
                                        std::vector<std::vector<double>> s) {
    if (s.empty()) throw InvalidInput("ensemble needs at least one sample");
    PosteriorEnsemble e;
    e.family = family;
    e.weights.assign(s.size(), 1.0 / static_cast<double>(s.size()));
    e.samples = std::move(s);
    return e;
  }
};

// Random-walk Metropolis-Hastings targeting log_posterior. The proposal scale
// is adapted during burn-in only, so the retained chain is a valid MH chain.
inline PosteriorEnsemble sample_posterior(const PreferenceDataset& data,
                                          const Prior& prior,
                                          const ResponseModel& response_model,
                                          const SamplerSettings& settings,
                                          std::uint64_t seed) {
  if (settings.num_samples < 1 || settings.thinning < 1 ||
      !(settings.proposal_scale > 0.0) ||
      !(settings.target_acceptance > 0.0 && settings.target_acceptance < 1.0)) {
    throw InvalidInput("invalid sampler settings");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> current = prior.initial_point();
  double current_lp = log_posterior(current, data, prior, response_model);
  std::vector<double> proposal(prior.dim);
  double scale = settings.proposal_scale;

  constexpr std::size_t kBatch = 50;
  std::size_t batch_accepts = 0;
  std::size_t kept_accepts = 0;
  const std::size_t total =
      settings.burn_in + settings.num_samples * settings.thinning;

  PosteriorEnsemble out;
  out.family = prior.family;
  out.samples.reserve(settings.num_samples);

  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t i = 0; i < prior.dim; ++i) {
      proposal[i] = current[i] + scale * normal(rng);
    }
    const double lp = log_posterior(proposal, data, prior, response_model);
    const double u = uniform(rng);
    bool accepted = false;
    if (std::isfinite(lp) && std::log(u) < lp - current_lp) {
      current.swap(proposal);
      current_lp = lp;
      accepted = true;
    }
    if (t < settings.burn_in) {
      batch_accepts += accepted ? 1 : 0;
      if (settings.adapt && (t + 1) % kBatch == 0) {
        const double rate =
            static_cast<double>(batch_accepts) / static_cast<double>(kBatch);
        scale *= std::exp(rate - settings.target_acceptance);
        scale = std::clamp(scale, 1e-4, 10.0);
        batch_accepts = 0;
      }
      continue;
    }
    kept_accepts += accepted ? 1 : 0;
    if ((t - settings.burn_in + 1) % settings.thinning == 0) {
      out.samples.push_back(current);
    }
  }

  if (prior.projects_to_sphere()) {
    for (auto& s : out.samples) {
      const double n = numeric::norm(s);
      if (n > 1e-12) {
        for (double& x : s) x /= n;
      }
    }
  }
  out.weights.assign(out.samples.size(),
                     1.0 / static_cast<double>(out.samples.size()));

  EnsembleProvenance& p = out.provenance;
  p.dataset_size = data.size();
  p.seed = seed;
  p.settings = settings;
  p.final_proposal_scale = scale;
  const std::size_t kept_steps = settings.num_samples * settings.thinning;
  p.acceptance_rate =
      static_cast<double>(kept_accepts) / static_cast<double>(kept_steps);
  if (p.acceptance_rate < 0.05 || p.acceptance_rate > 0.7) {
    p.warning = "acceptance rate " + std::to_string(p.acceptance_rate) +
                " outside [0.05, 0.7]";
  }
  return out;
}

struct MeanReward {
  RewardModel model;
  bool degenerate = false;
};

// Weighted mean of the samples; linear weights are renormalized, falling back
// to the first sample when the mean vanishes.
inline MeanReward posterior_mean_reward(const PosteriorEnsemble& ensemble) {
  if (ensemble.size() == 0) throw InvalidInput("empty ensemble");
  const std::size_t d = ensemble.samples.front().size();
  std::vector<double> mean(d, 0.0);
  for (std::size_t m = 0; m < ensemble.size(); ++m) {
    for (std::size_t i = 0; i < d; ++i) {
      mean[i] += ensemble.weights[m] * ensemble.samples[m][i];
    }
  }
  if (ensemble.family == RewardFamily::linear_features) {
    const double n = numeric::norm(mean);
    if (n < 1e-9) return {ensemble.model(0), true};
    for (double& x : mean) x /= n;
  }
  return {{ensemble.family, std::move(mean)}, false};
}

// Mean pairwise Euclidean distance between samples.
inline double ensemble_spread(const PosteriorEnsemble& ensemble) {
  const std::size_t m = ensemble.size();
  if (m < 2) return 0.0;
  double s = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      s += numeric::distance(ensemble.samples[a], ensemble.samples[b]);
    }
  }
  return s / (0.5 * static_cast<double>(m * (m - 1)));
}

}  // namespace prefalign
