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

// Live query sessions for human annotators. Each session wraps the same
// ActiveLearner the batch harness uses, so a session replays the harness
// exactly for a given seed, configuration and answer sequence.
//
// State-mutating calls on one session are serialized; a response submitted
// while another is being processed is rejected with Conflict. Summaries are
// served from a snapshot and never wait on a mutation.
//
// With an event log configured, create/query/response/close events are
// appended as JSON lines and replayed on construction.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "prefalign/acquisition.hpp"
#include "prefalign/belief.hpp"
#include "prefalign/error.hpp"
#include "prefalign/io.hpp"
#include "prefalign/task.hpp"

namespace prefalign {

inline constexpr const char* kApiVersion = "v1";

struct SessionConfig {
  std::string environment;
  PolicyKind policy = PolicyKind::align_ll;
  std::uint64_t seed = 0;
  // Demo mode traces alignment against the seed's simulated true reward.
  bool demo = false;
};

inline Json to_json(const SessionConfig& c) {
  return {{"environment", c.environment},
          {"policy", std::string(to_string(c.policy))},
          {"seed", c.seed},
          {"demo", c.demo}};
}

inline SessionConfig session_config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidInput("session config must be a JSON object");
  SessionConfig c;
  try {
    c.environment = j.at("environment").get<std::string>();
    c.policy = parse_policy(j.value("policy", std::string("align-ll")));
    c.seed = j.value("seed", std::uint64_t{0});
    c.demo = j.value("demo", false);
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed session config: ") + e.what());
  }
  return c;
}

enum class SessionStatus { active, exhausted, closed };

inline std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::exhausted: return "exhausted";
    case SessionStatus::closed: return "closed";
  }
  return "";
}

namespace detail {

inline Json item_payload(const Trajectory& t) {
  Json j{{"id", t.id}, {"features", t.features}};
  if (t.group_key) j["group_key"] = *t.group_key;
  if (!t.transitions.empty()) {
    const auto e = endpoint(t);
    j["endpoint"] = std::vector<double>(e.begin(), e.end());
    Json path = Json::array();
    path.push_back(t.transitions.front().state);
    for (const Transition& tr : t.transitions) path.push_back(tr.next_state);
    j["path"] = std::move(path);
  }
  return j;
}

inline Json metrics_payload(const std::vector<MetricValue>& values) {
  Json j = Json::object();
  for (const MetricValue& v : values) j[std::string(to_string(v.metric))] = v.value;
  return j;
}

}  // namespace detail

class SessionManager {
 public:
  explicit SessionManager(std::map<std::string, EnvironmentSpec> environments,
                          SamplerSettings sampler = {},
                          std::optional<std::filesystem::path> event_log = std::nullopt)
      : environments_(std::move(environments)), sampler_(sampler), log_path_(std::move(event_log)) {
    if (log_path_) {
      replay();
      log_.open(*log_path_, std::ios::app);
      if (!log_) throw InvalidInput("cannot open event log '" + log_path_->string() + "'");
    }
  }

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  std::vector<std::string> environment_names() const {
    std::vector<std::string> out;
    for (const auto& [name, spec] : environments_) out.push_back(name);
    return out;
  }

  Json create_session(const Json& body) {
    const SessionConfig config = session_config_from_json(body);
    std::string id;
    {
      std::unique_lock lock(sessions_mutex_);
      id = "s" + std::to_string(++counter_);
    }
    auto session = build(id, config);
    {
      std::unique_lock lock(sessions_mutex_);
      sessions_[id] = session;
    }
    log_event({{"type", "create"}, {"session", id}, {"config", to_json(config)}});
    return {{"version", kApiVersion}, {"id", id},
            {"status", std::string(to_string(session->status))}};
  }

  Json next_query(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->op_mutex);
    return next_locked(*s, /*log=*/true);
  }

  Json submit_response(const std::string& id, const Json& body) {
    if (!body.is_object() || !body.contains("choice") || !body["choice"].is_number_integer()) {
      throw InvalidInput("response body needs an integer 'choice'");
    }
    return submit_response(id, body["choice"].get<int>(), now_ms());
  }

  Json submit_response(const std::string& id, int choice, std::int64_t timestamp_ms) {
    auto s = find(id);
    std::unique_lock lock(s->op_mutex, std::try_to_lock);
    if (!lock.owns_lock()) throw Conflict("session '" + id + "' is processing another request");
    return submit_locked(*s, choice, timestamp_ms, /*log=*/true);
  }

  Json summary(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->snapshot_mutex);
    return *s->snapshot;
  }

  Json close_session(const std::string& id) {
    auto s = find(id);
    std::lock_guard lock(s->op_mutex);
    s->status = SessionStatus::closed;
    refresh_snapshot(*s);
    log_event({{"type", "close"}, {"session", id}});
    return {{"version", kApiVersion}, {"id", id}, {"status", "closed"}};
  }

  // Runs `fn(const ActiveLearner&)` while holding the session's lock.
  template <class Fn>
  auto inspect(const std::string& id, Fn&& fn) const {
    auto s = find(id);
    std::lock_guard lock(s->op_mutex);
    return fn(static_cast<const ActiveLearner&>(*s->learner));
  }

 private:
  struct TraceEntry {
    std::size_t k;
    double spread;
    std::vector<MetricValue> metrics;
  };

  struct Session {
    std::string id;
    SessionConfig config;
    std::unique_ptr<ActiveLearner> learner;
    SessionStatus status = SessionStatus::active;
    std::vector<std::int64_t> timestamps;
    std::vector<TraceEntry> trace;
    mutable std::mutex op_mutex;
    mutable std::mutex snapshot_mutex;
    std::shared_ptr<const Json> snapshot;
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  std::shared_ptr<const Task> task_for(const std::string& env, std::uint64_t seed) {
    const auto spec = environments_.find(env);
    if (spec == environments_.end()) throw InvalidInput("unknown environment '" + env + "'");
    std::lock_guard lock(tasks_mutex_);
    auto& slot = tasks_[{env, seed}];
    if (!slot) slot = make_task(spec->second, seed);
    return slot;
  }

  std::shared_ptr<Session> build(const std::string& id, const SessionConfig& config) {
    auto s = std::make_shared<Session>();
    s->id = id;
    s->config = config;
    s->learner = std::make_unique<ActiveLearner>(task_for(config.environment, config.seed),
                                                 config.policy, sampler_, config.seed);
    push_trace(*s);
    refresh_snapshot(*s);
    return s;
  }

  void push_trace(Session& s) {
    TraceEntry e{s.learner->dataset().size(), ensemble_spread(s.learner->ensemble()), {}};
    if (s.config.demo) e.metrics = s.learner->evaluate(s.learner->task().true_reward);
    s.trace.push_back(std::move(e));
  }

  Json next_locked(Session& s, bool log) {
    if (s.status == SessionStatus::closed) throw Conflict("session '" + s.id + "' is closed");
    if (s.status == SessionStatus::exhausted) return exhausted_payload(s);
    const bool fresh = !s.learner->pending().has_value();
    const Selection* sel = nullptr;
    try {
      sel = &s.learner->next_query();
    } catch (const Exhausted&) {
      s.status = SessionStatus::exhausted;
      refresh_snapshot(s);
      return exhausted_payload(s);
    }
    if (fresh) {
      refresh_snapshot(s);
      if (log) {
        log_event({{"type", "query"},
                   {"session", s.id},
                   {"pool_index", sel->pool_index ? Json(*sel->pool_index) : Json(nullptr)}});
      }
    }
    return query_payload(s, *sel);
  }

  Json submit_locked(Session& s, int choice, std::int64_t timestamp_ms, bool log) {
    if (s.status == SessionStatus::closed) throw Conflict("session '" + s.id + "' is closed");
    if (!s.learner->pending()) throw Conflict("session '" + s.id + "' has no pending query");
    if (choice != 0 && choice != 1) throw InvalidInput("choice must be 0 or 1");
    s.learner->answer(choice, Annotator::human, timestamp_ms);
    s.timestamps.push_back(timestamp_ms);
    push_trace(s);
    refresh_snapshot(s);
    if (log) {
      log_event({{"type", "response"}, {"session", s.id}, {"choice", choice},
                 {"timestamp", timestamp_ms}});
    }
    Json ack = build_summary(s, /*with_history=*/false);
    ack["accepted"] = true;
    return ack;
  }

  Json exhausted_payload(const Session& s) const {
    return {{"version", kApiVersion}, {"session", s.id}, {"status", "exhausted"},
            {"k", s.learner->dataset().size()}};
  }

  Json query_payload(const Session& s, const Selection& sel) const {
    const Query& q = sel.query;
    return {{"version", kApiVersion},
            {"session", s.id},
            {"status", "active"},
            {"k", s.learner->dataset().size()},
            {"query",
             {{"pool_index", sel.pool_index ? Json(*sel.pool_index) : Json(nullptr)},
              {"items", {detail::item_payload(*q.first), detail::item_payload(*q.second)}}}}};
  }

  Json build_summary(const Session& s, bool with_history) const {
    const ActiveLearner& l = *s.learner;
    const MeanReward mean = posterior_mean_reward(l.ensemble());
    Json j{{"version", kApiVersion},
           {"id", s.id},
           {"status", std::string(to_string(s.status))},
           {"config", to_json(s.config)},
           {"k", l.dataset().size()},
           {"beta", l.task().response_model.beta()},
           {"pending", l.pending().has_value()},
           {"posterior_mean", mean.model.params},
           {"posterior_mean_degenerate", mean.degenerate},
           {"spread", ensemble_spread(l.ensemble())}};
    if (with_history) {
      Json history = Json::array();
      const auto& asked = l.asked_queries();
      for (std::size_t i = 0; i < l.dataset().size(); ++i) {
        const Response& r = l.dataset()[i];
        history.push_back({{"k", i + 1},
                           {"pool_index", asked[i].pool_index ? Json(*asked[i].pool_index)
                                                              : Json(nullptr)},
                           {"items", {r.query.first->id, r.query.second->id}},
                           {"choice", r.choice},
                           {"timestamp", s.timestamps[i]}});
      }
      j["history"] = std::move(history);
    }
    Json trace = Json::array();
    for (const TraceEntry& e : s.trace) {
      Json t{{"k", e.k}, {"spread", e.spread}};
      if (s.config.demo) t["metrics"] = detail::metrics_payload(e.metrics);
      trace.push_back(std::move(t));
    }
    j["trace"] = std::move(trace);
    if (s.config.demo) j["reference"] = l.task().true_reward.params;
    return j;
  }

  void refresh_snapshot(Session& s) {
    auto snap = std::make_shared<const Json>(build_summary(s, /*with_history=*/true));
    std::lock_guard lock(s.snapshot_mutex);
    s.snapshot = std::move(snap);
  }

  void log_event(const Json& event) {
    if (!log_.is_open()) return;
    std::lock_guard lock(log_mutex_);
    log_ << event.dump() << '\n';
    log_.flush();
  }

  void replay() {
    std::ifstream in(*log_path_);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const Json e = Json::parse(line);
        const std::string type = e.at("type").get<std::string>();
        const std::string id = e.at("session").get<std::string>();
        if (type == "create") {
          const std::size_t n = std::stoul(id.substr(1));
          counter_ = std::max(counter_, n);
          sessions_[id] = build(id, session_config_from_json(e.at("config")));
        } else if (type == "query") {
          auto s = find(id);
          next_locked(*s, false);
        } else if (type == "response") {
          auto s = find(id);
          submit_locked(*s, e.at("choice").get<int>(), e.value("timestamp", std::int64_t{0}),
                        false);
        } else if (type == "close") {
          auto s = find(id);
          s->status = SessionStatus::closed;
          refresh_snapshot(*s);
        }
      } catch (const std::exception& ex) {
        throw InvalidInput("event log line " + std::to_string(line_no) + ": " + ex.what());
      }
    }
  }

  std::map<std::string, EnvironmentSpec> environments_;
  SamplerSettings sampler_;
  std::optional<std::filesystem::path> log_path_;
  std::ofstream log_;
  std::mutex log_mutex_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t counter_ = 0;

  std::mutex tasks_mutex_;
  std::map<std::pair<std::string, std::uint64_t>, std::shared_ptr<const Task>> tasks_;
};

}  // namespace prefalign
