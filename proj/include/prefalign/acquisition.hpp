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

// Query-selection policies over a fixed candidate pool: the generalized
// alignment objective, mutual information, maximum regret over a finite
// trajectory list, and a uniform random baseline.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefalign/alignment.hpp"
#include "prefalign/belief.hpp"
#include "prefalign/error.hpp"
#include "prefalign/numeric.hpp"
#include "prefalign/rewards.hpp"

namespace prefalign {

enum class PolicyKind { mi, align_ll, align_epic, align_rho, max_regret, random };

inline constexpr std::array<PolicyKind, 6> kAllPolicies = {
    PolicyKind::mi,        PolicyKind::align_ll,   PolicyKind::align_epic,
    PolicyKind::align_rho, PolicyKind::max_regret, PolicyKind::random};

inline std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::mi: return "mi";
    case PolicyKind::align_ll: return "align-ll";
    case PolicyKind::align_epic: return "align-epic";
    case PolicyKind::align_rho: return "align-rho";
    case PolicyKind::max_regret: return "max-regret";
    case PolicyKind::random: return "random";
  }
  return "";
}

inline PolicyKind parse_policy(std::string_view s) {
  for (PolicyKind p : kAllPolicies) {
    if (to_string(p) == s) return p;
  }
  throw InvalidInput("unknown policy '" + std::string(s) + "'");
}

// Alignment metric a policy optimizes, if any.
inline std::optional<MetricKind> metric_of(PolicyKind p) {
  switch (p) {
    case PolicyKind::align_ll: return MetricKind::loglikelihood;
    case PolicyKind::align_epic: return MetricKind::epic;
    case PolicyKind::align_rho: return MetricKind::rho;
    default: return std::nullopt;
  }
}

struct QueryPool {
  std::vector<Query> candidates;
  std::size_t size() const { return candidates.size(); }
};

// Samples up to `pool_size` distinct unordered pairs with random item order.
// When any trajectory carries a group key, pairs are drawn within groups of at
// least two members.
inline QueryPool build_query_pool(std::span<const Trajectory> trajectories,
                                  std::size_t pool_size, Rng& rng) {
  const bool grouped = std::any_of(trajectories.begin(), trajectories.end(),
                                   [](const Trajectory& t) { return t.group_key.has_value(); });
  std::vector<std::vector<std::size_t>> groups;
  if (grouped) {
    std::map<std::string, std::vector<std::size_t>> by_key;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      if (trajectories[i].group_key) by_key[*trajectories[i].group_key].push_back(i);
    }
    for (auto& [key, members] : by_key) {
      if (members.size() >= 2) groups.push_back(std::move(members));
    }
  } else if (trajectories.size() >= 2) {
    std::vector<std::size_t> all(trajectories.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    groups.push_back(std::move(all));
  }
  double possible = 0.0;
  for (const auto& g : groups) {
    possible += 0.5 * static_cast<double>(g.size()) * static_cast<double>(g.size() - 1);
  }
  QueryPool pool;
  if (groups.empty() || pool_size == 0) return pool;

  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (possible <= static_cast<double>(pool_size)) {
    for (const auto& g : groups) {
      for (std::size_t a = 0; a < g.size(); ++a) {
        for (std::size_t b = a + 1; b < g.size(); ++b) pairs.emplace_back(g[a], g[b]);
      }
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
  } else {
    // Member-weighted draw: pick a trajectory, then a partner in its group.
    std::vector<std::pair<std::size_t, std::size_t>> members;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      for (std::size_t k = 0; k < groups[gi].size(); ++k) members.emplace_back(gi, k);
    }
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (pairs.size() < pool_size) {
      const auto [gi, k] = members[pick(rng)];
      const auto& g = groups[gi];
      std::uniform_int_distribution<std::size_t> other(0, g.size() - 2);
      std::size_t k2 = other(rng);
      if (k2 >= k) ++k2;
      const std::size_t a = std::min(g[k], g[k2]);
      const std::size_t b = std::max(g[k], g[k2]);
      if (seen.insert({a, b}).second) pairs.emplace_back(a, b);
    }
  }
  for (auto [a, b] : pairs) {
    if (coin(rng) == 1) std::swap(a, b);
    pool.candidates.push_back(make_query(trajectories[a], trajectories[b]));
  }
  return pool;
}

// Response probabilities of every ensemble member for one query.
struct ChoiceTable {
  std::vector<double> first;
  std::vector<double> second;

  std::span<const double> of(int q) const { return q == 0 ? first : second; }
};

inline ChoiceTable choice_table(std::span<const RewardModel> models,
                                const Query& query,
                                const ResponseModel& response_model) {
  ChoiceTable t;
  t.first.reserve(models.size());
  t.second.reserve(models.size());
  for (const RewardModel& m : models) {
    const auto p = response_probability(response_model, m, query);
    t.first.push_back(p[0]);
    t.second.push_back(p[1]);
  }
  return t;
}

// Sum over answers q of E_{w,w'}[P(q|w) P(q|w') f(w,w')] / E_w[P(q|w)], with
// expectations taken under the ensemble weights.
inline double score_alignment_objective(const ChoiceTable& choices,
                                        std::span<const double> weights,
                                        const MetricMatrix& f) {
  const std::size_t m = weights.size();
  double score = 0.0;
  for (int q = 0; q < 2; ++q) {
    const auto p = choices.of(q);
    double den = 0.0;
    for (std::size_t i = 0; i < m; ++i) den += weights[i] * p[i];
    // Boltzmann likelihoods are strictly positive, so this only guards
    // against underflow.
    if (den < 1e-12) continue;
    double num = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double wi = weights[i] * p[i];
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += weights[j] * p[j] * f(i, j);
      num += wi * row;
    }
    score += num / den;
  }
  return score;
}

inline double score_alignment_objective(const Query& query,
                                        const PosteriorEnsemble& ensemble,
                                        const AlignmentMetric& metric,
                                        const ResponseModel& response_model) {
  const auto models = ensemble.models();
  const MetricMatrix f = compute_metric_matrix(metric, models);
  return score_alignment_objective(choice_table(models, query, response_model),
                                   ensemble.weights, f);
}

// Mutual information between the answer and the parameters, in bits.
inline double score_mutual_information(const ChoiceTable& choices,
                                       std::span<const double> weights) {
  double mean = 0.0;
  double conditional = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    mean += weights[i] * choices.first[i];
    conditional += weights[i] * numeric::binary_entropy_bits(choices.first[i]);
  }
  return std::clamp(numeric::binary_entropy_bits(mean) - conditional, 0.0, 1.0);
}

inline double score_mutual_information(const Query& query,
                                       const PosteriorEnsemble& ensemble,
                                       const ResponseModel& response_model) {
  return score_mutual_information(
      choice_table(ensemble.models(), query, response_model), ensemble.weights);
}

// The alignment objective with f(w, .) replaced by the log of the updated
// posterior mass of w, self-normalized over the ensemble. Only used to check
// that it ranks queries exactly as mutual information does.
inline double score_log_posterior_alignment(const ChoiceTable& choices,
                                            std::span<const double> weights) {
  const std::size_t m = weights.size();
  double score = 0.0;
  for (int q = 0; q < 2; ++q) {
    const auto p = choices.of(q);
    double den = 0.0;
    for (std::size_t i = 0; i < m; ++i) den += weights[i] * p[i];
    if (den < 1e-12) continue;
    std::vector<double> log_post(m);
    for (std::size_t i = 0; i < m; ++i) {
      log_post[i] = std::log(weights[i] * p[i] / den);
    }
    double num = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        num += weights[i] * p[i] * weights[j] * p[j] * log_post[i];
      }
    }
    score += num / den;
  }
  return score;
}

inline double score_log_posterior_alignment(const Query& query,
                                            const PosteriorEnsemble& ensemble,
                                            const ResponseModel& response_model) {
  return score_log_posterior_alignment(
      choice_table(ensemble.models(), query, response_model), ensemble.weights);
}

struct MaxRegretResult {
  Query query;
  double regret = 0.0;
  bool degenerate = false;
};

// Queries the optima of the two ensemble members with the largest weighted
// mutual regret. Ordered pairs whose optima cannot form a valid query are
// skipped. When no pair qualifies, the shared optimum is paired with the
// valid partner of largest ensemble-mean reward gap and flagged degenerate.
inline MaxRegretResult select_max_regret_query(
    const PosteriorEnsemble& ensemble, std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw InvalidInput("max-regret needs trajectories");
  if (ensemble.size() == 0) throw InvalidInput("empty ensemble");
  const std::size_t m = ensemble.size();
  const std::size_t n = trajectories.size();
  std::vector<double> reward(m * n);
  std::vector<std::size_t> best(m, 0);
  for (std::size_t a = 0; a < m; ++a) {
    const RewardModel model = ensemble.model(a);
    for (std::size_t t = 0; t < n; ++t) {
      reward[a * n + t] = evaluate_reward(model, trajectories[t]);
      if (reward[a * n + t] > reward[a * n + best[a]]) best[a] = t;
    }
  }
  auto compatible = [&](std::size_t i, std::size_t j) {
    return i != j && trajectories[i].group_key == trajectories[j].group_key;
  };
  double top = -std::numeric_limits<double>::infinity();
  std::optional<std::pair<std::size_t, std::size_t>> pick;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t xa = best[a];
      const std::size_t xb = best[b];
      if (!compatible(xa, xb)) continue;
      const double regret =
          ensemble.weights[a] * ensemble.weights[b] *
          (reward[a * n + xa] - reward[a * n + xb] + reward[b * n + xb] -
           reward[b * n + xa]);
      if (regret > top) {
        top = regret;
        pick = {xa, xb};
      }
    }
  }
  if (pick) {
    return {make_query(trajectories[pick->first], trajectories[pick->second]),
            top, false};
  }
  const std::size_t opt = best[0];
  std::optional<std::size_t> partner;
  double widest = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    if (!compatible(opt, t)) continue;
    double gap = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      gap += ensemble.weights[a] * (reward[a * n + opt] - reward[a * n + t]);
    }
    if (gap > widest) {
      widest = gap;
      partner = t;
    }
  }
  if (!partner) throw Exhausted("no trajectory can be paired with the optimum");
  return {make_query(trajectories[opt], trajectories[*partner]), 0.0, true};
}

struct PolicyInputs {
  const QueryPool* pool = nullptr;
  std::span<const unsigned char> asked;  // per pool index; empty means none asked
  const PosteriorEnsemble* ensemble = nullptr;
  const ResponseModel* response_model = nullptr;
  // Policy-side alignment context (align-* policies).
  std::shared_ptr<const AlignmentContext> context;
  // Candidate trajectories for max-regret.
  std::span<const Trajectory> trajectories;
};

struct Selection {
  PolicyKind policy = PolicyKind::random;
  std::optional<std::size_t> pool_index;
  Query query;
  double score = 0.0;
  bool degenerate = false;
};

namespace detail {

inline bool is_available(const PolicyInputs& in, std::size_t i) {
  return in.asked.empty() || !in.asked[i];
}

}  // namespace detail

// Score of every pool candidate under a pool-based policy (mi or align-*);
// asked candidates score NaN.
inline std::vector<double> score_pool(PolicyKind policy, const PolicyInputs& in) {
  const auto models = in.ensemble->models();
  MetricMatrix f;
  if (const auto kind = metric_of(policy)) {
    f = compute_metric_matrix(AlignmentMetric{*kind, in.context}, models);
  } else if (policy != PolicyKind::mi) {
    throw InvalidInput("policy '" + std::string(to_string(policy)) +
                       "' does not score pool candidates");
  }
  std::vector<double> scores(in.pool->size(),
                             std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < in.pool->size(); ++i) {
    if (!detail::is_available(in, i)) continue;
    const ChoiceTable t =
        choice_table(models, in.pool->candidates[i], *in.response_model);
    scores[i] = policy == PolicyKind::mi
                    ? score_mutual_information(t, in.ensemble->weights)
                    : score_alignment_objective(t, in.ensemble->weights, f);
  }
  return scores;
}

// Next query for the policy; ties go to the lowest pool index.
inline Selection next_query(PolicyKind policy, const PolicyInputs& in, Rng& rng) {
  Selection sel;
  sel.policy = policy;
  if (policy == PolicyKind::max_regret) {
    const MaxRegretResult r = select_max_regret_query(*in.ensemble, in.trajectories);
    sel.query = r.query;
    sel.score = r.regret;
    sel.degenerate = r.degenerate;
    for (std::size_t i = 0; i < in.pool->size(); ++i) {
      const Query& c = in.pool->candidates[i];
      if (c == r.query || c == r.query.swapped()) {
        sel.pool_index = i;
        break;
      }
    }
    return sel;
  }
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < in.pool->size(); ++i) {
    if (detail::is_available(in, i)) open.push_back(i);
  }
  if (open.empty()) throw Exhausted("query pool exhausted");
  if (policy == PolicyKind::random) {
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    sel.pool_index = open[pick(rng)];
  } else {
    const auto scores = score_pool(policy, in);
    std::size_t arg = open.front();
    for (std::size_t i : open) {
      if (scores[i] > scores[arg]) arg = i;
    }
    sel.pool_index = arg;
    sel.score = scores[arg];
  }
  sel.query = in.pool->candidates[*sel.pool_index];
  return sel;
}

}  // namespace prefalign
