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

// Experiment harness: seeded sweeps over policies with simulated annotators,
// per-query evaluation against the known true reward, and summaries with
// paired sign tests against the mutual-information baseline.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "prefalign/acquisition.hpp"
#include "prefalign/error.hpp"
#include "prefalign/io.hpp"
#include "prefalign/task.hpp"

namespace prefalign {

struct ExperimentConfig {
  std::string name = "experiment";
  EnvironmentSpec environment;
  std::vector<PolicyKind> policies{PolicyKind::mi, PolicyKind::align_ll,
                                   PolicyKind::align_rho};
  std::size_t queries = 20;
  std::vector<std::uint64_t> seeds;
  SamplerSettings sampler;
  // Worker threads for independent cells; results do not depend on it.
  std::size_t threads = 1;
};

inline Json to_json(const ExperimentConfig& c) {
  Json policies = Json::array();
  for (PolicyKind p : c.policies) policies.push_back(std::string(to_string(p)));
  return {{"name", c.name},
          {"environment", to_json(c.environment)},
          {"policies", policies},
          {"queries", c.queries},
          {"seeds", c.seeds},
          {"sampler", to_json(c.sampler)},
          {"threads", c.threads}};
}

inline ExperimentConfig config_from_json(const Json& j, const std::string& base_dir = "") {
  try {
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    c.environment = environment_from_json(j.at("environment"), base_dir);
    if (j.contains("policies")) {
      c.policies.clear();
      for (const Json& p : j["policies"]) c.policies.push_back(parse_policy(p.get<std::string>()));
    }
    if (c.policies.empty()) throw InvalidInput("config lists no policies");
    c.queries = j.value("queries", c.queries);
    if (c.queries < 1) throw InvalidInput("queries must be at least 1");
    const Json& seeds = j.at("seeds");
    if (seeds.is_array()) {
      c.seeds = seeds.get<std::vector<std::uint64_t>>();
    } else {
      const std::uint64_t start = seeds.value("start", std::uint64_t{0});
      const std::uint64_t count = seeds.at("count").get<std::uint64_t>();
      for (std::uint64_t i = 0; i < count; ++i) c.seeds.push_back(start + i);
    }
    if (c.seeds.empty()) throw InvalidInput("config lists no seeds");
    if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
      throw InvalidInput("seeds must be distinct");
    }
    if (j.contains("sampler")) c.sampler = sampler_from_json(j["sampler"]);
    c.threads = std::max<std::size_t>(1, j.value("threads", c.threads));
    const bool transitions = c.environment.kind == EnvironmentKind::goal_reach;
    for (PolicyKind p : c.policies) {
      if (metric_of(p) == MetricKind::epic && !transitions) {
        throw InvalidInput("policy 'align-epic' needs an environment with transitions");
      }
    }
    return c;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::exception& e) {
    throw InvalidInput("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path().string());
}

struct RecordRow {
  std::uint64_t seed = 0;
  std::string policy;
  std::size_t k = 0;
  std::string metric;
  double value = 0.0;
};

struct CellReport {
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::mi;
  bool ok = true;
  std::string error;
  double beta = 0.0;
  double agreement = 0.0;
  std::vector<double> true_reward;
  std::vector<std::optional<std::size_t>> pool_indices;
  std::vector<int> choices;
  std::vector<double> acceptance_rates;
  std::size_t sampler_warnings = 0;
};

struct ExperimentResult {
  std::vector<RecordRow> rows;
  std::vector<CellReport> cells;
};

// Runs one (seed, policy) cell: K rounds of select, simulate, resample,
// evaluate on the held-out target context. `on_round` sees the learner after
// each answer.
inline std::vector<RecordRow> run_cell(
    const std::shared_ptr<const Task>& task, PolicyKind policy,
    const ExperimentConfig& config, CellReport& report,
    const std::function<void(const ActiveLearner&)>& on_round = {}) {
  ActiveLearner learner(task, policy, config.sampler, task->seed);
  Rng responder(numeric::derive_seed(task->seed, "responses"));
  std::vector<RecordRow> rows;
  for (std::size_t k = 1; k <= config.queries; ++k) {
    const Selection sel = learner.next_query();
    const Response r = simulate_response(task->response_model, task->true_reward,
                                         sel.query, responder);
    learner.answer(r.choice, Annotator::simulated, 0);
    report.pool_indices.push_back(sel.pool_index);
    report.choices.push_back(r.choice);
    const auto& prov = learner.ensemble().provenance;
    report.acceptance_rates.push_back(prov.acceptance_rate);
    if (!prov.warning.empty()) ++report.sampler_warnings;
    if (on_round) on_round(learner);
    for (const MetricValue& mv : learner.evaluate(task->true_reward)) {
      rows.push_back({task->seed, std::string(to_string(policy)), k,
                      std::string(to_string(mv.metric)), mv.value});
    }
  }
  return rows;
}

// Cells are independent; a failing cell is reported and the sweep continues.
inline ExperimentResult run_experiment(
    const ExperimentConfig& config,
    const std::function<void(const CellReport&)>& on_cell = {}) {
  const std::size_t n_seeds = config.seeds.size();
  const std::size_t n_pol = config.policies.size();
  std::vector<std::vector<RecordRow>> cell_rows(n_seeds * n_pol);
  std::vector<CellReport> reports(n_seeds * n_pol);
  std::mutex callback_mutex;

  auto run_seed = [&](std::size_t s) {
    const std::uint64_t seed = config.seeds[s];
    std::shared_ptr<const Task> task;
    std::string task_error;
    try {
      task = make_task(config.environment, seed);
    } catch (const std::exception& e) {
      task_error = e.what();
    }
    for (std::size_t p = 0; p < n_pol; ++p) {
      CellReport& rep = reports[s * n_pol + p];
      rep.seed = seed;
      rep.policy = config.policies[p];
      if (!task) {
        rep.ok = false;
        rep.error = task_error;
      } else {
        rep.beta = task->response_model.beta();
        rep.agreement = task->agreement;
        rep.true_reward = task->true_reward.params;
        try {
          cell_rows[s * n_pol + p] = run_cell(task, config.policies[p], config, rep);
        } catch (const std::exception& e) {
          rep.ok = false;
          rep.error = e.what();
          cell_rows[s * n_pol + p].clear();
        }
      }
      if (on_cell) {
        std::lock_guard<std::mutex> lock(callback_mutex);
        on_cell(rep);
      }
    }
  };

  const std::size_t workers = std::min(config.threads, n_seeds);
  if (workers <= 1) {
    for (std::size_t s = 0; s < n_seeds; ++s) run_seed(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < n_seeds; s = next++) run_seed(s);
      });
    }
    for (auto& t : pool) t.join();
  }

  ExperimentResult out;
  out.cells = std::move(reports);
  for (auto& rows : cell_rows) {
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  return out;
}

inline Json manifest(const ExperimentConfig& config, const ExperimentResult& result) {
  Json cells = Json::array();
  for (const CellReport& c : result.cells) {
    Json idx = Json::array();
    for (const auto& i : c.pool_indices) idx.push_back(i ? Json(*i) : Json(nullptr));
    cells.push_back({{"seed", c.seed},
                     {"policy", std::string(to_string(c.policy))},
                     {"ok", c.ok},
                     {"error", c.error},
                     {"beta", c.beta},
                     {"agreement", c.agreement},
                     {"true_reward", c.true_reward},
                     {"pool_indices", idx},
                     {"choices", c.choices},
                     {"acceptance_rates", c.acceptance_rates},
                     {"sampler_warnings", c.sampler_warnings}});
  }
  return {{"config", to_json(config)},
          {"prior_support", config.environment.kind == EnvironmentKind::goal_reach
                                ? "workspace bounding box"
                                : "unit ball, projected to the unit sphere"},
          {"normalization", config.environment.kind == EnvironmentKind::corpus
                                ? "source-fit standardization applied to both domains"
                                : "none"},
          {"cells", cells}};
}

inline void write_records(std::ostream& out, const std::vector<RecordRow>& rows) {
  out << "seed,policy,k,metric,value\n";
  out << std::setprecision(17);
  for (const RecordRow& r : rows) {
    out << r.seed << ',' << r.policy << ',' << r.k << ',' << r.metric << ',' << r.value << '\n';
  }
}

inline std::vector<RecordRow> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("records file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "seed,policy,k,metric,value") {
    throw InvalidInput("records file has an unexpected header: '" + line + "'");
  }
  std::vector<RecordRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string seed, policy, k, metric, value;
    if (!std::getline(ss, seed, ',') || !std::getline(ss, policy, ',') ||
        !std::getline(ss, k, ',') || !std::getline(ss, metric, ',') ||
        !std::getline(ss, value)) {
      throw InvalidInput("records line " + std::to_string(line_no) + " is malformed");
    }
    try {
      rows.push_back({std::stoull(seed), policy, std::stoul(k), metric, std::stod(value)});
    } catch (const std::exception&) {
      throw InvalidInput("records line " + std::to_string(line_no) + " is malformed");
    }
  }
  return rows;
}

// Two-sided exact binomial sign test; ties are dropped before calling.
inline double sign_test_p(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  const std::size_t x = std::min(wins, losses);
  double tail = 0.0;
  for (std::size_t i = 0; i <= x; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                     static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

struct SummaryRow {
  std::string policy;
  std::size_t k = 0;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double se = 0.0;
  // Paired against the baseline policy over shared seeds.
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::optional<double> p_value;
};

inline std::vector<SummaryRow> summarize(const std::vector<RecordRow>& rows,
                                         const std::string& baseline = "mi") {
  if (rows.empty()) throw InvalidInput("no records to summarize");
  std::vector<std::string> policy_order;
  std::map<std::tuple<std::string, std::size_t, std::string>, std::map<std::uint64_t, double>>
      cells;
  for (const RecordRow& r : rows) {
    if (std::find(policy_order.begin(), policy_order.end(), r.policy) == policy_order.end()) {
      policy_order.push_back(r.policy);
    }
    cells[{r.policy, r.k, r.metric}][r.seed] = r.value;
  }
  std::vector<SummaryRow> out;
  for (const std::string& policy : policy_order) {
    for (const auto& [key, by_seed] : cells) {
      if (std::get<0>(key) != policy) continue;
      SummaryRow s;
      s.policy = policy;
      s.k = std::get<1>(key);
      s.metric = std::get<2>(key);
      s.n = by_seed.size();
      for (const auto& [seed, v] : by_seed) s.mean += v;
      s.mean /= static_cast<double>(s.n);
      if (s.n > 1) {
        double ss = 0.0;
        for (const auto& [seed, v] : by_seed) ss += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
      }
      if (policy != baseline) {
        const auto base = cells.find({baseline, s.k, s.metric});
        if (base != cells.end()) {
          for (const auto& [seed, v] : by_seed) {
            const auto b = base->second.find(seed);
            if (b == base->second.end()) continue;
            if (v > b->second) ++s.wins;
            if (v < b->second) ++s.losses;
          }
          s.p_value = sign_test_p(s.wins, s.losses);
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "policy,k,metric,n,mean,se,wins,losses,p_sign\n";
  out << std::setprecision(10);
  for (const SummaryRow& r : rows) {
    out << r.policy << ',' << r.k << ',' << r.metric << ',' << r.n << ',' << r.mean << ','
        << r.se << ',' << r.wins << ',' << r.losses << ',';
    if (r.p_value) out << *r.p_value;
    out << '\n';
  }
}

inline const SummaryRow* find_summary(const std::vector<SummaryRow>& rows,
                                      const std::string& policy, std::size_t k,
                                      const std::string& metric) {
  for (const SummaryRow& r : rows) {
    if (r.policy == policy && r.k == k && r.metric == metric) return &r;
  }
  return nullptr;
}

}  // namespace prefalign
