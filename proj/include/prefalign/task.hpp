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

// A seeded experiment task (domain data, true reward, calibrated response
// model, candidate pool, alignment contexts) and the adaptive query loop that
// both the batch harness and the live session service drive.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefalign/acquisition.hpp"
#include "prefalign/alignment.hpp"
#include "prefalign/belief.hpp"
#include "prefalign/domains.hpp"
#include "prefalign/error.hpp"
#include "prefalign/rewards.hpp"

namespace prefalign {

enum class EnvironmentKind { synthetic, goal_reach, corpus };

inline std::string_view to_string(EnvironmentKind k) {
  switch (k) {
    case EnvironmentKind::synthetic: return "synthetic";
    case EnvironmentKind::goal_reach: return "goal-reach";
    case EnvironmentKind::corpus: return "corpus";
  }
  return "";
}

inline EnvironmentKind parse_environment_kind(std::string_view s) {
  if (s == "synthetic") return EnvironmentKind::synthetic;
  if (s == "goal-reach") return EnvironmentKind::goal_reach;
  if (s == "corpus") return EnvironmentKind::corpus;
  throw InvalidInput("unknown environment kind '" + std::string(s) + "'");
}

struct EnvironmentSpec {
  EnvironmentKind kind = EnvironmentKind::synthetic;
  SyntheticDomainSpec synthetic;
  GoalReachSpec goal_reach;
  CorpusSpec corpus;
  std::size_t pool_size = 200;
  std::size_t eval_queries = 200;
  std::size_t eval_trajectories = 200;
  std::size_t epic_coverage = 2048;
  std::size_t epic_canonical_samples = 64;
  double target_agreement = 0.95;
  // Skips calibration when set.
  std::optional<double> beta;
};

inline DomainData generate_domain(const EnvironmentSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case EnvironmentKind::synthetic: return generate_synthetic(spec.synthetic, seed);
    case EnvironmentKind::goal_reach: return generate_goal_reach(spec.goal_reach, seed);
    case EnvironmentKind::corpus: return corpus_domain(spec.corpus);
  }
  throw InvalidInput("unknown environment kind");
}

// Everything a (seed, policy) cell shares with the other policies of the
// same seed. Queries and contexts point into the trajectory vectors, so a
// Task is built in place and never copied.
struct Task {
  EnvironmentSpec spec;
  std::uint64_t seed = 0;
  std::vector<Trajectory> source;
  // Target trajectories are split in two disjoint halves: one for the
  // contexts the align-* policies see, one held out for evaluation.
  std::vector<Trajectory> target_policy;
  std::vector<Trajectory> target_eval;
  Prior prior;
  RewardModel true_reward;
  ResponseModel response_model{1.0};
  double agreement = 0.5;
  QueryPool pool;
  std::shared_ptr<const AlignmentContext> policy_context;
  std::shared_ptr<const AlignmentContext> eval_context;
  std::vector<std::string> warnings;

  Task() = default;
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;

  bool has_transitions() const {
    return !source.empty() && !source.front().transitions.empty();
  }
};

namespace detail {

// Splits the target set in two halves; grouped corpora are split by group so
// that within-group queries stay inside one half.
inline std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split_target(
    std::vector<Trajectory> target, Rng& rng) {
  std::pair<std::vector<Trajectory>, std::vector<Trajectory>> out;
  const bool grouped = !target.empty() && target.front().group_key.has_value();
  if (!grouped) {
    std::shuffle(target.begin(), target.end(), rng);
    const std::size_t half = target.size() / 2;
    for (std::size_t i = 0; i < target.size(); ++i) {
      (i < half ? out.first : out.second).push_back(std::move(target[i]));
    }
    return out;
  }
  std::vector<std::string> keys;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto [it, fresh] = members.try_emplace(*target[i].group_key);
    if (fresh) keys.push_back(it->first);
    it->second.push_back(i);
  }
  std::sort(keys.begin(), keys.end());
  std::shuffle(keys.begin(), keys.end(), rng);
  for (std::size_t g = 0; g < keys.size(); ++g) {
    auto& dst = g < keys.size() / 2 ? out.first : out.second;
    for (std::size_t i : members[keys[g]]) dst.push_back(std::move(target[i]));
  }
  return out;
}

inline std::shared_ptr<const AlignmentContext> build_context(
    const std::vector<Trajectory>& target, const std::vector<const Trajectory*>& pooled,
    const EnvironmentSpec& spec, const ResponseModel& response_model, bool transitions,
    std::uint64_t seed) {
  auto ctx = std::make_shared<AlignmentContext>();
  Rng rng(seed);
  ctx->eval_queries = build_query_pool(target, spec.eval_queries, rng).candidates;
  std::vector<std::size_t> idx(target.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(idx.size(), spec.eval_trajectories));
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) ctx->eval_trajectories.push_back(&target[i]);
  if (transitions) {
    ctx->epic = make_epic_config(pooled, spec.epic_coverage,
                                 spec.epic_canonical_samples, rng());
  }
  ctx->response_model = response_model;
  return ctx;
}

}  // namespace detail

// Builds the task for one seed. Domain data, true reward, beta and pool depend
// on the seed only, never on the policy.
inline std::shared_ptr<const Task> make_task(const EnvironmentSpec& spec,
                                             std::uint64_t seed) {
  auto task = std::make_shared<Task>();
  task->spec = spec;
  task->seed = seed;
  DomainData data = generate_domain(spec, seed);
  if (data.source.size() < 2 || data.target.size() < 4) {
    throw InvalidInput("environment needs at least 2 source and 4 target trajectories");
  }
  const std::size_t feature_dim = data.source.front().features.size();
  for (const auto* set : {&data.source, &data.target}) {
    for (const Trajectory& t : *set) validate(t, feature_dim);
  }
  task->source = std::move(data.source);
  task->prior = data.prior;
  task->warnings = std::move(data.warnings);
  {
    Rng rng(numeric::derive_seed(seed, "split"));
    auto halves = detail::split_target(std::move(data.target), rng);
    task->target_policy = std::move(halves.first);
    task->target_eval = std::move(halves.second);
  }
  {
    Rng rng(numeric::derive_seed(seed, "true-reward"));
    task->true_reward = data.sample_true_reward(rng);
  }
  {
    Rng rng(numeric::derive_seed(seed, "pool"));
    task->pool = build_query_pool(task->source, spec.pool_size, rng);
  }
  if (task->pool.size() == 0) throw InvalidInput("environment yields an empty query pool");
  if (spec.beta) {
    task->response_model = ResponseModel(*spec.beta);
    std::vector<double> gaps;
    for (const Query& q : task->pool.candidates) {
      gaps.push_back(std::abs(evaluate_reward(task->true_reward, *q.first) -
                              evaluate_reward(task->true_reward, *q.second)));
    }
    task->agreement = expected_agreement(gaps, *spec.beta);
  } else {
    const auto cal = calibrate_beta_detailed(
        std::span<const RewardModel>(&task->true_reward, 1), task->pool.candidates,
        spec.target_agreement);
    task->response_model = ResponseModel(cal.beta);
    task->agreement = cal.agreement;
  }
  std::vector<const Trajectory*> pooled;
  for (const auto* set : {&task->source, &task->target_policy, &task->target_eval}) {
    for (const Trajectory& t : *set) pooled.push_back(&t);
  }
  const bool transitions = task->has_transitions();
  task->policy_context = detail::build_context(
      task->target_policy, pooled, spec, task->response_model, transitions,
      numeric::derive_seed(seed, "policy-context"));
  task->eval_context = detail::build_context(
      task->target_eval, pooled, spec, task->response_model, transitions,
      numeric::derive_seed(seed, "eval-context"));
  return task;
}

// Metric values of the ensemble against a reference reward, averaged over
// samples: E_w f(R_w, R_ref).
struct MetricValue {
  MetricKind metric;
  double value;
};

inline std::vector<MetricKind> evaluation_metrics(const AlignmentContext& ctx) {
  std::vector<MetricKind> out{MetricKind::loglikelihood, MetricKind::rho};
  if (ctx.epic) out.push_back(MetricKind::epic);
  return out;
}

inline std::vector<MetricValue> evaluate_ensemble(
    const PosteriorEnsemble& ensemble, const RewardModel& reference,
    const std::shared_ptr<const AlignmentContext>& ctx) {
  const auto models = ensemble.models();
  std::vector<MetricValue> out;
  for (MetricKind k : evaluation_metrics(*ctx)) {
    const auto values = metric_against(AlignmentMetric{k, ctx}, models, reference);
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += ensemble.weights[i] * values[i];
    out.push_back({k, s});
  }
  return out;
}

// One annotator's adaptive loop: pending query, dataset and current posterior.
// The posterior after k answers is sampled with a seed derived from
// (seed, k), so a fixed answer sequence reproduces the same ensembles.
class ActiveLearner {
 public:
  ActiveLearner(std::shared_ptr<const Task> task, PolicyKind policy,
                SamplerSettings sampler, std::uint64_t seed)
      : task_(std::move(task)),
        policy_(policy),
        sampler_(sampler),
        seed_(seed),
        policy_rng_(numeric::derive_seed(seed, "policy")),
        asked_(task_->pool.size(), 0) {
    if (metric_of(policy) == MetricKind::epic && !task_->policy_context->epic) {
      throw InvalidInput("policy 'align-epic' needs trajectories with transitions");
    }
    resample();
  }

  const Task& task() const { return *task_; }
  std::shared_ptr<const Task> task_ptr() const { return task_; }
  PolicyKind policy() const { return policy_; }
  std::uint64_t seed() const { return seed_; }
  const PreferenceDataset& dataset() const { return dataset_; }
  const PosteriorEnsemble& ensemble() const { return ensemble_; }
  const std::optional<Selection>& pending() const { return pending_; }
  const std::vector<Selection>& asked_queries() const { return history_; }

  // Returns the pending query, selecting one first if none is pending.
  // Throws Exhausted when the pool has no unasked candidate.
  const Selection& next_query() {
    if (pending_) return *pending_;
    PolicyInputs in;
    in.pool = &task_->pool;
    in.asked = asked_;
    in.ensemble = &ensemble_;
    in.response_model = &task_->response_model;
    in.context = task_->policy_context;
    in.trajectories = task_->source;
    pending_ = prefalign::next_query(policy_, in, policy_rng_);
    return *pending_;
  }

  void answer(int choice, Annotator who, std::int64_t timestamp_ms = now_ms()) {
    if (!pending_) throw Conflict("no pending query to answer");
    Response r = make_response(pending_->query, choice, who, timestamp_ms);
    if (pending_->pool_index) asked_[*pending_->pool_index] = 1;
    history_.push_back(*pending_);
    pending_.reset();
    dataset_.append(std::move(r));
    resample();
  }

  std::vector<MetricValue> evaluate(const RewardModel& reference) const {
    return evaluate_ensemble(ensemble_, reference, task_->eval_context);
  }

 private:
  void resample() {
    ensemble_ = sample_posterior(dataset_, task_->prior, task_->response_model, sampler_,
                                 numeric::derive_seed(seed_, "posterior", dataset_.size()));
  }

  std::shared_ptr<const Task> task_;
  PolicyKind policy_;
  SamplerSettings sampler_;
  std::uint64_t seed_;
  Rng policy_rng_;
  std::vector<unsigned char> asked_;
  PreferenceDataset dataset_;
  PosteriorEnsemble ensemble_;
  std::optional<Selection> pending_;
  std::vector<Selection> history_;
};

}  // namespace prefalign
