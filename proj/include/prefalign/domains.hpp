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

// Experiment domains: a synthetic feature environment with a shifted target
// distribution, a geometric goal-reaching environment with two workspaces,
// and ingestion of feature-labeled tabular corpora.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prefalign/belief.hpp"
#include "prefalign/error.hpp"
#include "prefalign/numeric.hpp"
#include "prefalign/rewards.hpp"

namespace prefalign {

struct DomainData {
  std::vector<Trajectory> source;
  std::vector<Trajectory> target;
  Prior prior;
  // Draws a true reward for one experiment seed.
  std::function<RewardModel(Rng&)> sample_true_reward;
  std::vector<std::string> warnings;
};

struct SyntheticDomainSpec {
  std::size_t dim = 15;
  std::size_t shifted = 10;
  std::size_t source_count = 1000;
  std::size_t target_count = 1000;
  // Standard deviation of each mixture component on shifted features.
  double mixture_sd = 1e-2;
};

// Source features are i.i.d. N(0, 1). In the target, the first `shifted`
// features follow 1/2 N(-1, sd^2) + 1/2 N(1, sd^2); the rest match the source.
inline DomainData generate_synthetic(const SyntheticDomainSpec& spec,
                                     std::uint64_t seed) {
  if (spec.dim == 0 || spec.shifted > spec.dim) {
    throw InvalidInput("synthetic domain needs 0 <= shifted <= dim, dim > 0");
  }
  Rng rng(numeric::derive_seed(seed, "synthetic"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  DomainData out;
  out.source.reserve(spec.source_count);
  for (std::size_t i = 0; i < spec.source_count; ++i) {
    Trajectory t;
    t.id = "s" + std::to_string(i);
    t.domain = DomainTag::source;
    t.features.resize(spec.dim);
    for (double& x : t.features) x = normal(rng);
    out.source.push_back(std::move(t));
  }
  out.target.reserve(spec.target_count);
  for (std::size_t i = 0; i < spec.target_count; ++i) {
    Trajectory t;
    t.id = "t" + std::to_string(i);
    t.domain = DomainTag::target;
    t.features.resize(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      t.features[j] = j < spec.shifted
                          ? (coin(rng) ? 1.0 : -1.0) + spec.mixture_sd * normal(rng)
                          : normal(rng);
    }
    out.target.push_back(std::move(t));
  }
  out.prior = Prior::unit_ball(RewardFamily::linear_features, spec.dim);
  const std::size_t d = spec.dim;
  out.sample_true_reward = [d](Rng& r) {
    return RewardModel{RewardFamily::linear_features, numeric::random_unit_vector(d, r)};
  };
  return out;
}

struct Box3 {
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  bool contains(std::span<const double> p) const {
    for (int i = 0; i < 3; ++i) {
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    }
    return true;
  }
};

struct GoalReachSpec {
  Box3 source_box{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  Box3 target_box{{0.5, 0.5, 0.5}, {1.5, 1.5, 1.5}};
  std::size_t length = 8;
  std::size_t source_count = 500;
  std::size_t target_count = 500;
  double noise = 0.02;
};

namespace detail {

inline std::array<double, 3> uniform_in(const Box3& b, Rng& rng) {
  std::array<double, 3> p{};
  for (int i = 0; i < 3; ++i) {
    std::uniform_real_distribution<double> u(b.lo[i], b.hi[i]);
    p[i] = u(rng);
  }
  return p;
}

// Reach from a start to an end point inside the box: straight-line waypoints
// with kinematic noise on the interior points; the last state is the end point.
inline Trajectory reach_trajectory(const Box3& box, std::size_t length,
                                   double noise, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto start = uniform_in(box, rng);
  const auto end = uniform_in(box, rng);
  std::vector<std::vector<double>> states;
  states.reserve(length + 1);
  for (std::size_t t = 0; t <= length; ++t) {
    const double a = static_cast<double>(t) / static_cast<double>(length);
    std::vector<double> p(3);
    for (int i = 0; i < 3; ++i) {
      p[i] = (1.0 - a) * start[i] + a * end[i];
      if (t > 0 && t < length) p[i] += noise * normal(rng);
    }
    states.push_back(std::move(p));
  }
  Trajectory traj;
  for (std::size_t t = 0; t < length; ++t) {
    Transition tr;
    tr.state = states[t];
    tr.next_state = states[t + 1];
    tr.action.resize(3);
    for (int i = 0; i < 3; ++i) tr.action[i] = tr.next_state[i] - tr.state[i];
    traj.transitions.push_back(std::move(tr));
  }
  traj.features.assign(end.begin(), end.end());
  return traj;
}

}  // namespace detail

// Goal-reaching analog of a feeding task: two arms with different reachable
// workspaces; the reward is the negative distance of the final position to a
// goal drawn uniformly in the target workspace.
inline DomainData generate_goal_reach(const GoalReachSpec& spec,
                                      std::uint64_t seed) {
  for (const Box3* b : {&spec.source_box, &spec.target_box}) {
    for (int i = 0; i < 3; ++i) {
      if (!(b->hi[i] > b->lo[i])) throw InvalidInput("workspace box is degenerate");
    }
  }
  if (spec.source_box.lo == spec.target_box.lo &&
      spec.source_box.hi == spec.target_box.hi) {
    throw InvalidInput("source and target workspaces must differ");
  }
  if (spec.length < 1) throw InvalidInput("trajectory length must be positive");
  Rng rng(numeric::derive_seed(seed, "goal-reach"));
  DomainData out;
  for (std::size_t i = 0; i < spec.source_count; ++i) {
    Trajectory t = detail::reach_trajectory(spec.source_box, spec.length, spec.noise, rng);
    t.id = "s" + std::to_string(i);
    t.domain = DomainTag::source;
    out.source.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < spec.target_count; ++i) {
    Trajectory t = detail::reach_trajectory(spec.target_box, spec.length, spec.noise, rng);
    t.id = "t" + std::to_string(i);
    t.domain = DomainTag::target;
    out.target.push_back(std::move(t));
  }
  std::vector<double> lo(3), hi(3);
  for (int i = 0; i < 3; ++i) {
    lo[i] = std::min(spec.source_box.lo[i], spec.target_box.lo[i]);
    hi[i] = std::max(spec.source_box.hi[i], spec.target_box.hi[i]);
  }
  out.prior = Prior::box(RewardFamily::goal_distance, lo, hi);
  const Box3 goals = spec.target_box;
  out.sample_true_reward = [goals](Rng& r) {
    const auto g = detail::uniform_in(goals, r);
    return RewardModel{RewardFamily::goal_distance, {g.begin(), g.end()}};
  };
  return out;
}

struct CorpusSpec {
  std::string path;
  // Empty means every column after id, group and domain.
  std::vector<std::string> feature_columns;
  std::string source_domain = "source";
  std::string target_domain = "target";
  char delimiter = ',';
};

struct CorpusData {
  std::vector<Trajectory> source;
  std::vector<Trajectory> target;
  std::vector<std::string> feature_names;
  // Source-fit standardization applied to both domains.
  std::vector<double> means;
  std::vector<double> stddevs;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delim)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

}  // namespace detail

// Reads `id, group, domain, features...` rows. Feature columns are
// standardized with source statistics (population variance); zero-variance
// columns and groups with fewer than two members are dropped with a warning.
inline CorpusData ingest_corpus(std::istream& in, const CorpusSpec& spec) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("corpus is empty");
  const auto header = detail::split_row(line, spec.delimiter);
  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw InvalidInput("corpus is missing column '" + name + "'");
  };
  const std::size_t id_col = column("id");
  const std::size_t group_col = column("group");
  const std::size_t domain_col = column("domain");
  std::vector<std::string> names = spec.feature_columns;
  if (names.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i != id_col && i != group_col && i != domain_col) names.push_back(header[i]);
    }
  }
  if (names.empty()) throw InvalidInput("corpus declares no feature columns");
  std::vector<std::size_t> feature_cols;
  for (const auto& n : names) feature_cols.push_back(column(n));

  struct Row {
    std::string id, group;
    DomainTag domain;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_row(line, spec.delimiter);
    if (cells.size() != header.size()) {
      throw InvalidInput("corpus line " + std::to_string(line_no) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(header.size()));
    }
    Row r;
    r.id = cells[id_col];
    r.group = cells[group_col];
    const std::string& dom = cells[domain_col];
    if (dom == spec.source_domain) {
      r.domain = DomainTag::source;
    } else if (dom == spec.target_domain) {
      r.domain = DomainTag::target;
    } else {
      throw InvalidInput("corpus line " + std::to_string(line_no) +
                         " has unknown domain '" + dom + "'");
    }
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::string& cell = cells[feature_cols[k]];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size() || !std::isfinite(v)) {
        throw InvalidInput("corpus line " + std::to_string(line_no) + " column '" +
                           names[k] + "' is not numeric: '" + cell + "'");
      }
      r.values.push_back(v);
    }
    rows.push_back(std::move(r));
  }

  CorpusData out;
  // Groups are per domain; a post belongs to one domain.
  std::map<std::pair<int, std::string>, std::size_t> group_size;
  for (const Row& r : rows) ++group_size[{static_cast<int>(r.domain), r.group}];
  for (const auto& [key, n] : group_size) {
    if (n < 2) {
      out.warnings.push_back("dropped group '" + key.second + "' in " +
                             std::string(to_string(static_cast<DomainTag>(key.first))) +
                             " with fewer than two members");
    }
  }
  std::erase_if(rows, [&](const Row& r) {
    return group_size[{static_cast<int>(r.domain), r.group}] < 2;
  });

  std::vector<double> mean(names.size(), 0.0), sd(names.size(), 0.0);
  std::size_t n_source = 0;
  for (const Row& r : rows) {
    if (r.domain != DomainTag::source) continue;
    ++n_source;
    for (std::size_t k = 0; k < names.size(); ++k) mean[k] += r.values[k];
  }
  if (n_source == 0) throw InvalidInput("corpus has no usable source rows");
  for (double& m : mean) m /= static_cast<double>(n_source);
  for (const Row& r : rows) {
    if (r.domain != DomainTag::source) continue;
    for (std::size_t k = 0; k < names.size(); ++k) {
      const double d = r.values[k] - mean[k];
      sd[k] += d * d;
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < names.size(); ++k) {
    sd[k] = std::sqrt(sd[k] / static_cast<double>(n_source));
    if (sd[k] <= 1e-12 * std::max(1.0, std::abs(mean[k]))) {
      out.warnings.push_back("dropped constant feature column '" + names[k] + "'");
      continue;
    }
    kept.push_back(k);
    out.feature_names.push_back(names[k]);
    out.means.push_back(mean[k]);
    out.stddevs.push_back(sd[k]);
  }
  if (kept.empty()) throw InvalidInput("corpus has no non-constant feature column");

  for (const Row& r : rows) {
    Trajectory t;
    t.id = r.id;
    t.domain = r.domain;
    t.group_key = r.group;
    for (std::size_t k : kept) t.features.push_back((r.values[k] - mean[k]) / sd[k]);
    (r.domain == DomainTag::source ? out.source : out.target).push_back(std::move(t));
  }
  return out;
}

inline CorpusData ingest_corpus(const CorpusSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw InvalidInput("cannot open corpus '" + spec.path + "'");
  return ingest_corpus(in, spec);
}

// Corpus as an experiment domain: linear rewards with weights uniform on the
// unit sphere over the retained features.
inline DomainData corpus_domain(const CorpusSpec& spec) {
  CorpusData c = ingest_corpus(spec);
  DomainData out;
  const std::size_t d = c.feature_names.size();
  out.source = std::move(c.source);
  out.target = std::move(c.target);
  out.warnings = std::move(c.warnings);
  out.prior = Prior::unit_ball(RewardFamily::linear_features, d);
  out.sample_true_reward = [d](Rng& r) {
    return RewardModel{RewardFamily::linear_features, numeric::random_unit_vector(d, r)};
  };
  return out;
}

}  // namespace prefalign
