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

// prefalign command-line driver.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prefalign/bench.hpp"
#include "prefalign/domains.hpp"
#include "prefalign/error.hpp"
#include "prefalign/io.hpp"
#include "prefalign/service.hpp"
#include "prefalign/session.hpp"
#include "prefalign/task.hpp"

namespace fs = std::filesystem;
using namespace prefalign;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::exception& e) {
    throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, bool quiet) {
  ExperimentConfig config = load_config(config_path);
  if (seed) config.seeds = {*seed};
  fs::create_directories(out_dir);
  std::size_t failed = 0;
  const ExperimentResult result = run_experiment(config, [&](const CellReport& c) {
    if (!c.ok) ++failed;
    if (quiet) return;
    std::cerr << "seed " << c.seed << ' ' << to_string(c.policy)
              << (c.ok ? " ok" : " FAILED: " + c.error) << '\n';
  });
  {
    auto out = open_out(fs::path(out_dir) / "records.csv");
    write_records(out, result.rows);
  }
  {
    auto out = open_out(fs::path(out_dir) / "manifest.json");
    out << manifest(config, result).dump(2) << '\n';
  }
  if (!result.rows.empty()) {
    auto out = open_out(fs::path(out_dir) / "summary.csv");
    write_summary(out, summarize(result.rows));
  }
  std::cout << "wrote " << result.rows.size() << " rows to " << out_dir << '\n';
  if (failed > 0) {
    std::cerr << failed << " of " << result.cells.size() << " cells failed\n";
    return kRuntimeFailure;
  }
  return 0;
}

int cmd_summarize(const std::string& records, const std::string& out,
                  const std::string& baseline) {
  std::ifstream in(records);
  if (!in) throw InvalidInput("cannot open records '" + records + "'");
  const auto rows = read_records(in);
  if (rows.empty()) throw InvalidInput("records file '" + records + "' has no rows");
  const auto table = summarize(rows, baseline);
  if (out.empty()) {
    write_summary(std::cout, table);
  } else {
    auto f = open_out(out);
    write_summary(f, table);
  }
  return 0;
}

int cmd_calibrate(const std::string& config_path, std::optional<std::uint64_t> seed) {
  const ExperimentConfig config = load_config(config_path);
  const std::vector<std::uint64_t> seeds = seed ? std::vector{*seed} : config.seeds;
  std::cout << "seed,beta,agreement\n" << std::setprecision(10);
  for (std::uint64_t s : seeds) {
    const auto task = make_task(config.environment, s);
    std::cout << s << ',' << task->response_model.beta() << ',' << task->agreement << '\n';
  }
  return 0;
}

int cmd_ingest(const std::string& config_path, const std::string& out) {
  const Json j = read_json_file(config_path);
  const Json& env = j.contains("environment") ? j["environment"] : j;
  const EnvironmentSpec spec =
      environment_from_json(env, fs::path(config_path).parent_path().string());
  if (spec.kind != EnvironmentKind::corpus) {
    throw InvalidInput("ingest needs a corpus environment");
  }
  const CorpusData data = ingest_corpus(spec.corpus);
  for (const std::string& w : data.warnings) std::cerr << "warning: " << w << '\n';
  std::vector<Trajectory> all = data.source;
  all.insert(all.end(), data.target.begin(), data.target.end());
  if (out.empty()) {
    write_trajectories(std::cout, all);
  } else {
    auto f = open_out(out);
    write_trajectories(f, all);
  }
  std::cerr << "ingested " << data.source.size() << " source and " << data.target.size()
            << " target trajectories over " << data.feature_names.size() << " features\n";
  return 0;
}

struct ServeOptions {
  std::string config;
  std::string host;
  int port = 0;
  std::string event_log;
  std::string static_dir;
  bool static_from_config = false;
};

int cmd_serve(ServeOptions o) {
  std::map<std::string, EnvironmentSpec> envs;
  SamplerSettings sampler;
  if (!o.config.empty()) {
    const Json j = read_json_file(o.config);
    const std::string base = fs::path(o.config).parent_path().string();
    if (!j.contains("environments") || !j["environments"].is_object()) {
      throw InvalidInput("service config needs an 'environments' object");
    }
    for (const auto& [name, spec] : j["environments"].items()) {
      envs[name] = environment_from_json(spec, base);
    }
    if (j.contains("sampler")) sampler = sampler_from_json(j["sampler"]);
    if (o.event_log.empty()) o.event_log = j.value("event_log", std::string());
    if (o.static_dir.empty()) {
      o.static_dir = j.value("static_dir", std::string());
      o.static_from_config = true;
    }
    if (!o.event_log.empty() && fs::path(o.event_log).is_relative()) {
      o.event_log = (fs::path(base) / o.event_log).string();
    }
    if (!o.static_dir.empty() && fs::path(o.static_dir).is_relative()) {
      o.static_dir = (fs::path(base) / o.static_dir).string();
    }
    // The UI bundle is built separately; a config may name it before it exists.
    if (!o.static_dir.empty() && o.static_from_config && !fs::is_directory(o.static_dir)) {
      std::cerr << "warning: static directory '" << o.static_dir << "' not found, UI disabled\n";
      o.static_dir.clear();
    }
  } else {
    envs["synthetic"] = EnvironmentSpec{};
    EnvironmentSpec gr;
    gr.kind = EnvironmentKind::goal_reach;
    envs["goal-reach"] = gr;
  }
  if (o.host.empty()) {
    const char* h = std::getenv("PREFALIGN_HOST");
    o.host = h ? h : "127.0.0.1";
  }
  if (o.port == 0) {
    const char* p = std::getenv("PREFALIGN_PORT");
    o.port = p ? std::atoi(p) : 8080;
  }
  if (o.port <= 0 || o.port > 65535) throw InvalidInput("port out of range");

  SessionManager manager(std::move(envs), sampler,
                         o.event_log.empty() ? std::nullopt
                                             : std::optional<fs::path>(o.event_log));
  httplib::Server server;
  install_routes(server, manager,
                 o.static_dir.empty() ? std::nullopt : std::optional<fs::path>(o.static_dir));
  std::cerr << "listening on http://" << o.host << ':' << o.port << '\n';
  if (!server.listen(o.host, o.port)) throw Error("cannot bind " + o.host + ":" + std::to_string(o.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alignment-driven active preference learning"};
  app.require_subcommand(1);

  std::string config, out, records, baseline = "mi";
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run an experiment config and write records");
  run->add_option("--config,-c", config, "Experiment config (JSON)")->required();
  run->add_option("--out,-o", out, "Output directory")->default_val("results");
  run->add_option("--seed", seed, "Run a single seed instead of the config's list");
  run->add_flag("--quiet,-q", quiet, "Suppress per-cell progress");

  auto* sum = app.add_subcommand("summarize", "Summarize a records file");
  sum->add_option("--records,-r", records, "Records CSV")->required();
  sum->add_option("--out,-o", out, "Summary CSV (default: stdout)");
  sum->add_option("--baseline", baseline, "Policy to pair against")->default_val("mi");

  auto* cal = app.add_subcommand("calibrate", "Report the calibrated beta per seed");
  cal->add_option("--config,-c", config, "Experiment config (JSON)")->required();
  cal->add_option("--seed", seed, "Only this seed");

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Launch the session service");
  serve->add_option("--config,-c", serve_opts.config, "Service config (JSON)");
  serve->add_option("--host", serve_opts.host, "Bind address (env PREFALIGN_HOST)");
  serve->add_option("--port,-p", serve_opts.port, "Port (env PREFALIGN_PORT)");
  serve->add_option("--event-log", serve_opts.event_log, "Append-only session event log");
  serve->add_option("--static", serve_opts.static_dir, "Directory served at /");

  auto* ing = app.add_subcommand("ingest", "Convert a corpus into a trajectory file");
  ing->add_option("--config,-c", config, "Corpus environment config (JSON)")->required();
  ing->add_option("--out,-o", out, "Output JSONL (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*run) return cmd_run(config, out, seed, quiet);
    if (*sum) return cmd_summarize(records, out, baseline);
    if (*cal) return cmd_calibrate(config, seed);
    if (*serve) return cmd_serve(serve_opts);
    if (*ing) return cmd_ingest(config, out);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
