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

// Domain types for preference learning: trajectories, pairwise queries,
// responses, reward families, and the Boltzmann-rational response model.

#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/error.hpp"
#include "prefalign/numeric.hpp"

namespace prefalign {

enum class DomainTag { source, target };

inline std::string_view to_string(DomainTag tag) {
  return tag == DomainTag::source ? "source" : "target";
}

inline DomainTag parse_domain_tag(std::string_view s) {
  if (s == "source") return DomainTag::source;
  if (s == "target") return DomainTag::target;
  throw InvalidInput("unknown domain tag '" + std::string(s) + "'");
}

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> next_state;
};

struct Trajectory {
  std::string id;
  std::vector<double> features;
  // Empty when the domain has no step-level data.
  std::vector<Transition> transitions;
  DomainTag domain = DomainTag::source;
  std::optional<std::string> group_key;
};

// Checks the trajectory invariants against the environment's feature count.
inline void validate(const Trajectory& t, std::size_t feature_dim) {
  if (t.features.size() != feature_dim) {
    throw InvalidInput("trajectory '" + t.id + "' has " +
                       std::to_string(t.features.size()) +
                       " features, expected " + std::to_string(feature_dim));
  }
  if (t.transitions.empty()) return;
  const std::size_t sd = t.transitions.front().state.size();
  for (const Transition& tr : t.transitions) {
    if (tr.state.size() != sd || tr.next_state.size() != sd) {
      throw InvalidInput("trajectory '" + t.id +
                         "' has non-uniform state dimensions");
    }
  }
}

// Final position of the trajectory: the first three coordinates of the last
// next_state, or the first three features when no transitions exist.
inline std::span<const double> endpoint(const Trajectory& t) {
  std::span<const double> src = t.transitions.empty()
                                    ? std::span<const double>(t.features)
                                    : std::span<const double>(t.transitions.back().next_state);
  if (src.size() < 3) {
    throw InvalidInput("trajectory '" + t.id + "' has no 3-D endpoint");
  }
  return src.first(3);
}

enum class RewardFamily { linear_features, goal_distance };

inline std::string_view to_string(RewardFamily f) {
  return f == RewardFamily::linear_features ? "linear" : "goal-distance";
}

inline RewardFamily parse_reward_family(std::string_view s) {
  if (s == "linear") return RewardFamily::linear_features;
  if (s == "goal-distance") return RewardFamily::goal_distance;
  throw InvalidInput("unknown reward family '" + std::string(s) + "'");
}

struct RewardModel {
  RewardFamily family = RewardFamily::linear_features;
  std::vector<double> params;
};

// Cumulative reward R_w(trajectory).
inline double evaluate_reward(const RewardModel& model, const Trajectory& t) {
  switch (model.family) {
    case RewardFamily::linear_features:
      if (model.params.size() != t.features.size()) {
        throw InvalidInput("linear reward has " +
                           std::to_string(model.params.size()) +
                           " weights but trajectory '" + t.id + "' has " +
                           std::to_string(t.features.size()) + " features");
      }
      return numeric::dot(model.params, t.features);
    case RewardFamily::goal_distance: {
      if (model.params.size() != 3) {
        throw InvalidInput("goal-distance reward needs a 3-D goal");
      }
      return -numeric::distance(endpoint(t), model.params);
    }
  }
  return 0.0;
}

// Step reward r(s, a, s') used for EPIC: linear weights over the next-state
// vector, or the negative distance of the next position to the goal.
inline double transition_reward(const RewardModel& model,
                                std::span<const double> /*state*/,
                                std::span<const double> /*action*/,
                                std::span<const double> next_state) {
  switch (model.family) {
    case RewardFamily::linear_features:
      if (model.params.size() != next_state.size()) {
        throw InvalidInput("linear step reward dimension mismatch");
      }
      return numeric::dot(model.params, next_state);
    case RewardFamily::goal_distance:
      if (model.params.size() != 3 || next_state.size() < 3) {
        throw InvalidInput("goal-distance step reward needs 3-D positions");
      }
      return -numeric::distance(next_state.first(3), model.params);
  }
  return 0.0;
}

// Pairwise query. Holds non-owning references into a trajectory set that
// must outlive it.
struct Query {
  const Trajectory* first = nullptr;
  const Trajectory* second = nullptr;

  const Trajectory& item(int i) const { return i == 0 ? *first : *second; }
  Query swapped() const { return Query{second, first}; }
  friend bool operator==(const Query&, const Query&) = default;
};

inline Query make_query(const Trajectory& a, const Trajectory& b) {
  if (&a == &b || a.id == b.id) {
    throw InvalidInput("query items must differ ('" + a.id + "')");
  }
  if ((a.group_key || b.group_key) && a.group_key != b.group_key) {
    throw InvalidInput("query items '" + a.id + "' and '" + b.id +
                       "' belong to different groups");
  }
  return Query{&a, &b};
}

enum class Annotator { simulated, human };

inline std::string_view to_string(Annotator a) {
  return a == Annotator::simulated ? "simulated" : "human";
}

struct Response {
  Query query;
  int choice = 0;
  Annotator annotator = Annotator::simulated;
  std::int64_t timestamp_ms = 0;

  const Trajectory& chosen() const { return query.item(choice); }
  const Trajectory& rejected() const { return query.item(1 - choice); }
};

inline std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch())
      .count();
}

inline Response make_response(Query q, int choice, Annotator who,
                              std::int64_t timestamp_ms = now_ms()) {
  if (choice != 0 && choice != 1) {
    throw InvalidInput("choice must be 0 or 1, got " + std::to_string(choice));
  }
  return Response{q, choice, who, timestamp_ms};
}

// Append-only record of answered queries.
class PreferenceDataset {
 public:
  void append(Response r) { records_.push_back(std::move(r)); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<Response>& records() const { return records_; }
  const Response& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

 private:
  std::vector<Response> records_;
};

// Boltzmann-rational annotator with rationality coefficient beta > 0.
class ResponseModel {
 public:
  explicit ResponseModel(double beta) : beta_(beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
      throw InvalidInput("rationality coefficient must be positive and finite");
    }
  }
  double beta() const { return beta_; }

  // P(choose first), P(choose second) given the two rewards.
  std::array<double, 2> choice_probabilities(double reward_first,
                                             double reward_second) const {
    const double a = beta_ * reward_first;
    const double b = beta_ * reward_second;
    const double m = std::max(a, b);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    return {ea / (ea + eb), eb / (ea + eb)};
  }

  double log_choice_probability(double reward_chosen,
                                double reward_other) const {
    return numeric::log_sigmoid(beta_ * (reward_chosen - reward_other));
  }

 private:
  double beta_;
};

inline std::array<double, 2> response_probability(const ResponseModel& model,
                                                  const RewardModel& reward,
                                                  const Query& q) {
  return model.choice_probabilities(evaluate_reward(reward, *q.first),
                                    evaluate_reward(reward, *q.second));
}

inline Response simulate_response(const ResponseModel& model,
                                  const RewardModel& true_reward,
                                  const Query& q, Rng& rng) {
  const auto p = response_probability(model, true_reward, q);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int choice = u(rng) < p[0] ? 0 : 1;
  return make_response(q, choice, Annotator::simulated);
}

// Expected fraction of responses that agree with the strict reward ordering
// at the given beta. Zero-gap pairs count as 1/2.
inline double expected_agreement(std::span<const double> reward_gaps,
                                 double beta) {
  if (reward_gaps.empty()) return 0.5;
  double s = 0.0;
  for (double g : reward_gaps) s += g > 0.0 ? numeric::sigmoid(beta * g) : 0.5;
  return s / static_cast<double>(reward_gaps.size());
}

struct CalibrationResult {
  double beta = 1.0;
  double agreement = 0.5;
};

// Finds beta whose expected agreement on the pool matches the target, by
// bisection on log(beta) over [1e-4, 1e4].
inline CalibrationResult calibrate_beta_detailed(
    std::span<const RewardModel> true_rewards, std::span<const Query> pool,
    double target_agreement) {
  if (!(target_agreement > 0.5 && target_agreement < 1.0)) {
    throw InvalidInput("target agreement must lie in (0.5, 1)");
  }
  if (true_rewards.empty() || pool.empty()) {
    throw InvalidInput("calibration needs non-empty reward and query pools");
  }
  constexpr double kTolerance = 0.02;
  std::vector<double> gaps;
  gaps.reserve(true_rewards.size() * pool.size());
  for (const RewardModel& r : true_rewards) {
    for (const Query& q : pool) {
      gaps.push_back(std::abs(evaluate_reward(r, *q.first) -
                              evaluate_reward(r, *q.second)));
    }
  }
  double lo = std::log(1e-4);
  double hi = std::log(1e4);
  const double a_lo = expected_agreement(gaps, std::exp(lo));
  const double a_hi = expected_agreement(gaps, std::exp(hi));
  if (target_agreement <= a_lo) {
    if (a_lo - target_agreement <= kTolerance) return {std::exp(lo), a_lo};
    throw CalibrationError("target agreement below the smallest reachable");
  }
  if (target_agreement >= a_hi) {
    if (target_agreement - a_hi <= kTolerance) return {std::exp(hi), a_hi};
    throw CalibrationError(
        "target agreement unreachable (reachable maximum " +
        std::to_string(a_hi) + ")");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (expected_agreement(gaps, std::exp(mid)) < target_agreement) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double beta = std::exp(0.5 * (lo + hi));
  return {beta, expected_agreement(gaps, beta)};
}

inline double calibrate_beta(std::span<const RewardModel> true_rewards,
                             std::span<const Query> pool,
                             double target_agreement) {
  return calibrate_beta_detailed(true_rewards, pool, target_agreement).beta;
}

}  // namespace prefalign
