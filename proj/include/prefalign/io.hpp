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

// JSON forms of trajectories, sampler settings and environment specs, and the
// line-delimited trajectory record format.

#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefalign/belief.hpp"
#include "prefalign/error.hpp"
#include "prefalign/rewards.hpp"
#include "prefalign/task.hpp"

namespace prefalign {

using Json = nlohmann::json;

inline Json to_json(const Trajectory& t) {
  Json j;
  j["id"] = t.id;
  j["domain_tag"] = std::string(to_string(t.domain));
  if (t.group_key) j["group_key"] = *t.group_key;
  j["features"] = t.features;
  if (!t.transitions.empty()) {
    Json tr = Json::array();
    for (const Transition& x : t.transitions) {
      tr.push_back({{"state", x.state}, {"action", x.action}, {"next_state", x.next_state}});
    }
    j["transitions"] = std::move(tr);
  }
  return j;
}

inline Trajectory trajectory_from_json(const Json& j) {
  try {
    Trajectory t;
    t.id = j.at("id").get<std::string>();
    t.domain = parse_domain_tag(j.at("domain_tag").get<std::string>());
    if (j.contains("group_key") && !j["group_key"].is_null()) {
      t.group_key = j["group_key"].get<std::string>();
    }
    t.features = j.at("features").get<std::vector<double>>();
    if (j.contains("transitions")) {
      for (const Json& x : j["transitions"]) {
        t.transitions.push_back({x.at("state").get<std::vector<double>>(),
                                 x.at("action").get<std::vector<double>>(),
                                 x.at("next_state").get<std::vector<double>>()});
      }
      if (t.transitions.empty()) {
        throw InvalidInput("trajectory '" + t.id + "' has an empty transitions list");
      }
    }
    validate(t, t.features.size());
    return t;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed trajectory record: ") + e.what());
  }
}

// One JSON object per line.
inline void write_trajectories(std::ostream& out, std::span<const Trajectory> set) {
  for (const Trajectory& t : set) out << to_json(t).dump() << '\n';
}

inline std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw InvalidInput("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(trajectory_from_json(j));
  }
  if (!out.empty()) {
    const std::size_t d = out.front().features.size();
    for (const Trajectory& t : out) validate(t, d);
  }
  return out;
}

inline Json to_json(const SamplerSettings& s) {
  return {{"burn_in", s.burn_in},
          {"samples", s.num_samples},
          {"thinning", s.thinning},
          {"proposal_scale", s.proposal_scale},
          {"target_acceptance", s.target_acceptance},
          {"adapt", s.adapt}};
}

inline SamplerSettings sampler_from_json(const Json& j, SamplerSettings s = {}) {
  s.burn_in = j.value("burn_in", s.burn_in);
  s.num_samples = j.value("samples", s.num_samples);
  s.thinning = j.value("thinning", s.thinning);
  s.proposal_scale = j.value("proposal_scale", s.proposal_scale);
  s.target_acceptance = j.value("target_acceptance", s.target_acceptance);
  s.adapt = j.value("adapt", s.adapt);
  if (s.num_samples < 2 || s.thinning < 1 || !(s.proposal_scale > 0.0)) {
    throw InvalidInput("sampler needs samples >= 2, thinning >= 1, proposal_scale > 0");
  }
  return s;
}

namespace detail {

inline Box3 box_from_json(const Json& j, Box3 b) {
  if (j.contains("lo")) {
    const auto v = j["lo"].get<std::vector<double>>();
    if (v.size() != 3) throw InvalidInput("workspace bounds need 3 coordinates");
    std::copy(v.begin(), v.end(), b.lo.begin());
  }
  if (j.contains("hi")) {
    const auto v = j["hi"].get<std::vector<double>>();
    if (v.size() != 3) throw InvalidInput("workspace bounds need 3 coordinates");
    std::copy(v.begin(), v.end(), b.hi.begin());
  }
  return b;
}

inline Json box_to_json(const Box3& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

}  // namespace detail

inline Json to_json(const EnvironmentSpec& e) {
  Json j;
  j["kind"] = std::string(to_string(e.kind));
  switch (e.kind) {
    case EnvironmentKind::synthetic:
      j["dim"] = e.synthetic.dim;
      j["shifted"] = e.synthetic.shifted;
      j["source_count"] = e.synthetic.source_count;
      j["target_count"] = e.synthetic.target_count;
      j["mixture_sd"] = e.synthetic.mixture_sd;
      break;
    case EnvironmentKind::goal_reach:
      j["source_box"] = detail::box_to_json(e.goal_reach.source_box);
      j["target_box"] = detail::box_to_json(e.goal_reach.target_box);
      j["length"] = e.goal_reach.length;
      j["source_count"] = e.goal_reach.source_count;
      j["target_count"] = e.goal_reach.target_count;
      j["noise"] = e.goal_reach.noise;
      break;
    case EnvironmentKind::corpus:
      j["path"] = e.corpus.path;
      j["feature_columns"] = e.corpus.feature_columns;
      j["source_domain"] = e.corpus.source_domain;
      j["target_domain"] = e.corpus.target_domain;
      j["delimiter"] = std::string(1, e.corpus.delimiter);
      break;
  }
  j["pool_size"] = e.pool_size;
  j["eval_queries"] = e.eval_queries;
  j["eval_trajectories"] = e.eval_trajectories;
  j["epic_coverage"] = e.epic_coverage;
  j["epic_canonical_samples"] = e.epic_canonical_samples;
  j["target_agreement"] = e.target_agreement;
  if (e.beta) j["beta"] = *e.beta;
  return j;
}

// `base_dir` resolves relative corpus paths.
inline EnvironmentSpec environment_from_json(const Json& j,
                                             const std::string& base_dir = "") {
  try {
    EnvironmentSpec e;
    e.kind = parse_environment_kind(j.at("kind").get<std::string>());
    switch (e.kind) {
      case EnvironmentKind::synthetic:
        e.synthetic.dim = j.value("dim", e.synthetic.dim);
        e.synthetic.shifted = j.value("shifted", e.synthetic.shifted);
        e.synthetic.source_count = j.value("source_count", e.synthetic.source_count);
        e.synthetic.target_count = j.value("target_count", e.synthetic.target_count);
        e.synthetic.mixture_sd = j.value("mixture_sd", e.synthetic.mixture_sd);
        if (e.synthetic.dim == 0 || e.synthetic.shifted > e.synthetic.dim) {
          throw InvalidInput("synthetic environment needs 0 <= shifted <= dim");
        }
        break;
      case EnvironmentKind::goal_reach: {
        GoalReachSpec& g = e.goal_reach;
        if (j.contains("source_box")) g.source_box = detail::box_from_json(j["source_box"], g.source_box);
        if (j.contains("target_box")) g.target_box = detail::box_from_json(j["target_box"], g.target_box);
        g.length = j.value("length", g.length);
        g.source_count = j.value("source_count", g.source_count);
        g.target_count = j.value("target_count", g.target_count);
        g.noise = j.value("noise", g.noise);
        break;
      }
      case EnvironmentKind::corpus: {
        std::string path = j.at("path").get<std::string>();
        if (!path.empty() && path.front() != '/' && !base_dir.empty()) {
          path = base_dir + "/" + path;
        }
        e.corpus.path = path;
        e.corpus.feature_columns =
            j.value("feature_columns", std::vector<std::string>{});
        e.corpus.source_domain = j.value("source_domain", e.corpus.source_domain);
        e.corpus.target_domain = j.value("target_domain", e.corpus.target_domain);
        const std::string delim = j.value("delimiter", std::string(","));
        if (delim.size() != 1) throw InvalidInput("delimiter must be one character");
        e.corpus.delimiter = delim[0];
        break;
      }
    }
    e.pool_size = j.value("pool_size", e.pool_size);
    e.eval_queries = j.value("eval_queries", e.eval_queries);
    e.eval_trajectories = j.value("eval_trajectories", e.eval_trajectories);
    e.epic_coverage = j.value("epic_coverage", e.epic_coverage);
    e.epic_canonical_samples = j.value("epic_canonical_samples", e.epic_canonical_samples);
    e.target_agreement = j.value("target_agreement", e.target_agreement);
    if (j.contains("beta") && !j["beta"].is_null()) e.beta = j["beta"].get<double>();
    if (e.pool_size == 0 || e.eval_queries == 0 || e.eval_trajectories < 2) {
      throw InvalidInput("environment needs pool_size, eval_queries >= 1 and eval_trajectories >= 2");
    }
    if (!(e.target_agreement > 0.5 && e.target_agreement < 1.0)) {
      throw InvalidInput("target_agreement must lie in (0.5, 1)");
    }
    return e;
  } catch (const Json::exception& ex) {
    throw InvalidInput(std::string("malformed environment: ") + ex.what());
  }
}

}  // namespace prefalign
