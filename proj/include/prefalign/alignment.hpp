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

// Alignment metrics between two reward functions: a symmetric loglikelihood
// agreement score, EPIC distance, and the rho-projection distance.
//
// Every metric is computed in two stages: a per-reward projection (reward
// gaps on the evaluation queries, a softmax over evaluation trajectories, or
// a standardized canonical reward over the EPIC coverage sample) and a
// symmetric comparison of two projections. Batched evaluation over an
// ensemble projects each reward once and compares all pairs, which gives
// results bit-identical to the pairwise functions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/error.hpp"
#include "prefalign/numeric.hpp"
#include "prefalign/rewards.hpp"

namespace prefalign {

enum class MetricKind { loglikelihood, epic, rho };

inline std::string_view to_string(MetricKind k) {
  switch (k) {
    case MetricKind::loglikelihood: return "loglikelihood";
    case MetricKind::epic: return "epic";
    case MetricKind::rho: return "rho";
  }
  return "";
}

inline MetricKind parse_metric_kind(std::string_view s) {
  if (s == "loglikelihood" || s == "ll") return MetricKind::loglikelihood;
  if (s == "epic") return MetricKind::epic;
  if (s == "rho") return MetricKind::rho;
  throw InvalidInput("unknown metric '" + std::string(s) + "'");
}

// Sample sets for EPIC: coverage transitions to correlate over, and paired
// (S, A, S') draws used for the canonicalization expectations.
struct EpicConfig {
  std::vector<Transition> coverage;
  std::vector<std::vector<double>> canon_states;
  std::vector<std::vector<double>> canon_actions;
  std::vector<std::vector<double>> canon_next_states;
  double gamma = 1.0;
};

// Empirical coverage over the pooled transitions of the given trajectories.
inline EpicConfig make_epic_config(std::span<const Trajectory* const> pooled,
                                   std::size_t coverage_count,
                                   std::size_t canonical_samples,
                                   std::uint64_t seed, double gamma = 1.0) {
  std::vector<const Transition*> transitions;
  for (const Trajectory* t : pooled) {
    for (const Transition& tr : t->transitions) transitions.push_back(&tr);
  }
  if (transitions.empty()) {
    throw ContextError("EPIC needs trajectories with transitions");
  }
  if (coverage_count == 0 || canonical_samples == 0) {
    throw InvalidInput("EPIC sample counts must be positive");
  }
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, transitions.size() - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  auto draw_state = [&]() -> const std::vector<double>& {
    const Transition& tr = *transitions[pick(rng)];
    return coin(rng) == 0 ? tr.state : tr.next_state;
  };
  EpicConfig cfg;
  cfg.gamma = gamma;
  cfg.coverage.reserve(coverage_count);
  for (std::size_t i = 0; i < coverage_count; ++i) {
    cfg.coverage.push_back(*transitions[pick(rng)]);
  }
  for (std::size_t i = 0; i < canonical_samples; ++i) {
    cfg.canon_states.push_back(draw_state());
    cfg.canon_actions.push_back(transitions[pick(rng)]->action);
    cfg.canon_next_states.push_back(draw_state());
  }
  return cfg;
}

struct AlignmentContext {
  std::vector<Query> eval_queries;
  std::vector<const Trajectory*> eval_trajectories;
  std::optional<EpicConfig> epic;
  std::optional<ResponseModel> response_model;
};

struct AlignmentMetric {
  MetricKind kind = MetricKind::loglikelihood;
  std::shared_ptr<const AlignmentContext> context;
};

namespace detail {

// Unit-norm, zero-mean copy of `values`. Throws on zero variance.
inline std::vector<double> standardize(std::vector<double> values) {
  double mean = 0.0;
  double scale = 0.0;
  for (double v : values) {
    mean += v;
    scale = std::max(scale, std::abs(v));
  }
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double& v : values) {
    v -= mean;
    ss += v * v;
  }
  const double n = std::sqrt(ss);
  if (!(n > 1e-12 * std::max(1.0, scale) *
                std::sqrt(static_cast<double>(values.size())))) {
    throw DegenerateReward("canonicalized reward has zero variance");
  }
  for (double& v : values) v /= n;
  return values;
}

}  // namespace detail

// Canonically shaped reward C(R) evaluated at every coverage transition, for
// an arbitrary step reward r(s, a, s').
template <class StepReward>
std::vector<double> canonicalize(StepReward&& r, const EpicConfig& cfg) {
  const std::size_t n = cfg.canon_states.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  auto expect_from = [&](const std::vector<double>& s) {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      e += r(s, cfg.canon_actions[i], cfg.canon_next_states[i]);
    }
    return e * inv_n;
  };
  double e_all = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e_all += r(cfg.canon_states[i], cfg.canon_actions[i],
               cfg.canon_next_states[i]);
  }
  e_all *= inv_n;
  std::vector<double> out;
  out.reserve(cfg.coverage.size());
  for (const Transition& tr : cfg.coverage) {
    out.push_back(r(tr.state, tr.action, tr.next_state) +
                  cfg.gamma * expect_from(tr.next_state) -
                  expect_from(tr.state) - cfg.gamma * e_all);
  }
  return out;
}

// Both reward families depend on the next state only, so the three
// expectations collapse to the same mean; this reproduces the generic sum
// exactly while skipping the per-point expectations.
inline std::vector<double> canonicalize(const RewardModel& model,
                                        const EpicConfig& cfg) {
  const std::size_t n = cfg.canon_states.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e += transition_reward(model, cfg.canon_states[i], cfg.canon_actions[i],
                           cfg.canon_next_states[i]);
  }
  e *= inv_n;
  std::vector<double> out;
  out.reserve(cfg.coverage.size());
  for (const Transition& tr : cfg.coverage) {
    out.push_back(transition_reward(model, tr.state, tr.action, tr.next_state) +
                  cfg.gamma * e - e - cfg.gamma * e);
  }
  return out;
}

// Pearson distance sqrt((1 - rho) / 2), computed as half the Euclidean
// distance between standardized vectors so identical inputs give exactly 0.
inline double pearson_distance(std::span<const double> ua,
                               std::span<const double> ub) {
  return 0.5 * numeric::distance(ua, ub);
}

template <class StepA, class StepB>
double epic_distance(StepA&& ra, StepB&& rb, const EpicConfig& cfg) {
  const auto ua = detail::standardize(canonicalize(ra, cfg));
  const auto ub = detail::standardize(canonicalize(rb, cfg));
  return pearson_distance(ua, ub);
}

// Per-reward summary that a metric compares.
struct Projection {
  std::vector<double> values;
};

namespace detail {

inline void require_context(const AlignmentMetric& m) {
  if (!m.context) throw ContextError("alignment metric has no context");
  const AlignmentContext& c = *m.context;
  switch (m.kind) {
    case MetricKind::loglikelihood:
      if (c.eval_queries.empty()) {
        throw ContextError("loglikelihood metric needs evaluation queries");
      }
      if (!c.response_model) {
        throw ContextError("loglikelihood metric needs a response model");
      }
      break;
    case MetricKind::rho:
      if (c.eval_trajectories.size() < 2) {
        throw ContextError("rho metric needs at least two trajectories");
      }
      break;
    case MetricKind::epic:
      if (!c.epic || c.epic->coverage.empty() || c.epic->canon_states.empty()) {
        throw ContextError("EPIC metric needs a coverage configuration");
      }
      break;
  }
}

}  // namespace detail

inline Projection project(const AlignmentMetric& metric,
                          const RewardModel& reward) {
  detail::require_context(metric);
  const AlignmentContext& c = *metric.context;
  Projection p;
  switch (metric.kind) {
    case MetricKind::loglikelihood:
      p.values.reserve(c.eval_queries.size());
      for (const Query& q : c.eval_queries) {
        p.values.push_back(evaluate_reward(reward, *q.first) -
                           evaluate_reward(reward, *q.second));
      }
      break;
    case MetricKind::rho: {
      std::vector<double> r;
      r.reserve(c.eval_trajectories.size());
      for (const Trajectory* t : c.eval_trajectories) {
        r.push_back(evaluate_reward(reward, *t));
      }
      p.values = numeric::softmax(r);
      break;
    }
    case MetricKind::epic:
      p.values = detail::standardize(canonicalize(reward, *c.epic));
      break;
  }
  return p;
}

namespace detail {

// g(a, b): log-probability under `a` of the responses `b` predicts, with ties
// going to the first item.
inline double directed_loglikelihood(std::span<const double> gaps_a,
                                     std::span<const double> gaps_b,
                                     double beta) {
  double s = 0.0;
  for (std::size_t j = 0; j < gaps_a.size(); ++j) {
    const double x = beta * gaps_a[j];
    s += numeric::log_sigmoid(gaps_b[j] >= 0.0 ? x : -x);
  }
  return s;
}

}  // namespace detail

// Higher is more aligned for every kind.
inline double compare(const AlignmentMetric& metric, const Projection& a,
                      const Projection& b) {
  switch (metric.kind) {
    case MetricKind::loglikelihood: {
      const double beta = metric.context->response_model->beta();
      return detail::directed_loglikelihood(a.values, b.values, beta) +
             detail::directed_loglikelihood(b.values, a.values, beta);
    }
    case MetricKind::rho:
      return -numeric::distance(a.values, b.values);
    case MetricKind::epic:
      return -pearson_distance(a.values, b.values);
  }
  return 0.0;
}

inline double evaluate(const AlignmentMetric& metric, const RewardModel& a,
                       const RewardModel& b) {
  return compare(metric, project(metric, a), project(metric, b));
}

inline AlignmentMetric make_metric(MetricKind kind, const AlignmentContext& c) {
  return {kind, std::make_shared<const AlignmentContext>(c)};
}

// Symmetric loglikelihood agreement f^LL; always <= 0.
inline double f_loglikelihood(const RewardModel& a, const RewardModel& b,
                              const AlignmentContext& ctx) {
  return evaluate(make_metric(MetricKind::loglikelihood, ctx), a, b);
}

// EPIC distance in [0, 1] between the step rewards of two models.
inline double epic_distance(const RewardModel& a, const RewardModel& b,
                            const AlignmentContext& ctx) {
  return -evaluate(make_metric(MetricKind::epic, ctx), a, b);
}

// -||rho(a) - rho(b)||_2 with rho the softmax over the evaluation
// trajectories; in [-sqrt(2), 0].
inline double f_rho(const RewardModel& a, const RewardModel& b,
                    const AlignmentContext& ctx) {
  return evaluate(make_metric(MetricKind::rho, ctx), a, b);
}

// Row-major M x M table of f(R_i, R_j).
class MetricMatrix {
 public:
  MetricMatrix() = default;
  MetricMatrix(std::size_t n, double fill) : n_(n), v_(n * n, fill) {}
  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> v_;
};

inline std::vector<Projection> project_all(const AlignmentMetric& metric,
                                           std::span<const RewardModel> rewards) {
  std::vector<Projection> out;
  out.reserve(rewards.size());
  for (const RewardModel& r : rewards) out.push_back(project(metric, r));
  return out;
}

inline MetricMatrix compute_metric_matrix(const AlignmentMetric& metric,
                                          std::span<const RewardModel> rewards) {
  const auto proj = project_all(metric, rewards);
  MetricMatrix m(rewards.size(), 0.0);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    for (std::size_t j = i; j < rewards.size(); ++j) {
      const double v = compare(metric, proj[i], proj[j]);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

// f(R_i, reference) for every reward.
inline std::vector<double> metric_against(const AlignmentMetric& metric,
                                          std::span<const RewardModel> rewards,
                                          const RewardModel& reference) {
  const Projection ref = project(metric, reference);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (const RewardModel& r : rewards) {
    out.push_back(compare(metric, project(metric, r), ref));
  }
  return out;
}

}  // namespace prefalign
