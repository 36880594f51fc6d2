/* Copyright 2026 The effbench Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// effbench command-line front end. Links only the C API.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "effbench/effbench.h"

namespace {

using json = nlohmann::json;

int Report(eb_status st) {
  if (st != EB_OK) std::cerr << "effbench: " << eb_last_error() << std::endl;
  return static_cast<int>(st);
}

std::string Take(char* s) {
  std::string out = s ? s : "";
  eb_string_free(s);
  return out;
}

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> output_dir, meter, lock_path, lock_transcript, state_file;
  std::optional<uint64_t> seed;
  std::optional<double> idle_watts, intensity, heartbeat_s, queue_timeout_s;
  std::optional<int> warmup;
  bool print_config = false;
  bool summary = false;
};

int DoRun(const RunArgs& a) {
  eb_config* cfg = nullptr;
  if (eb_status st = eb_config_load(a.config.c_str(), &cfg); st != EB_OK) return Report(st);
  std::vector<std::pair<std::string, std::string>> overrides;
  auto str = [](const std::string& s) { return json(s).dump(); };
  if (a.output_dir) overrides.emplace_back("output_dir", str(*a.output_dir));
  if (a.meter) overrides.emplace_back("meter", *a.meter);
  if (a.lock_path) overrides.emplace_back("lock_path", str(*a.lock_path));
  if (a.lock_transcript) overrides.emplace_back("lock_transcript", str(*a.lock_transcript));
  if (a.state_file) overrides.emplace_back("state_file", str(*a.state_file));
  if (a.seed) overrides.emplace_back("seed", std::to_string(*a.seed));
  if (a.idle_watts) overrides.emplace_back("idle_watts", json(*a.idle_watts).dump());
  if (a.intensity) overrides.emplace_back("intensity_g_per_kwh", json(*a.intensity).dump());
  if (a.heartbeat_s) overrides.emplace_back("heartbeat_s", json(*a.heartbeat_s).dump());
  if (a.queue_timeout_s) overrides.emplace_back("queue_timeout_s", json(*a.queue_timeout_s).dump());
  if (a.warmup) overrides.emplace_back("warmup_batches", std::to_string(*a.warmup));
  for (const auto& kv : a.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "effbench: --set expects key=value, got \"" << kv << "\"" << std::endl;
      eb_config_free(cfg);
      return EB_ERR_CONFIG;
    }
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : overrides) {
    if (eb_status st = eb_config_set(cfg, k.c_str(), v.c_str()); st != EB_OK) {
      eb_config_free(cfg);
      return Report(st);
    }
  }
  if (a.print_config) {
    char* out = nullptr;
    eb_status st = eb_config_resolve(cfg, &out);
    if (st == EB_OK) std::cout << Take(out) << std::endl;
    eb_config_free(cfg);
    return Report(st);
  }
  char* summary = nullptr;
  eb_status st = eb_run(cfg, &summary);
  eb_config_free(cfg);
  std::string text = Take(summary);
  if (!text.empty()) {
    if (a.summary) {
      std::cout << text << std::endl;
    } else {
      json j = json::parse(text, nullptr, false);
      if (!j.is_discarded())
        for (const auto& s : j["scenarios"])
          std::cout << s.value("scenario", "") << ": "
                    << (s.value("ok", false) ? s.value("report", "") : "FAILED " + s.value("error", ""))
                    << "\n";
    }
  }
  return Report(st);
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* lvl = std::getenv("EFFBENCH_LOG"); lvl && *lvl) eb_set_log_level(lvl);

  CLI::App app{"effbench: inference efficiency benchmarking harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eb_version()));
  std::string log_level;
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run every configured scenario against a model");
  run_cmd->add_option("-c,--config", run.config, "Run configuration (JSON)")->required();
  run_cmd->add_option("--set", run.sets, "Override a config key: key=<JSON value>");
  run_cmd->add_option("-o,--output-dir", run.output_dir, "Report directory");
  run_cmd->add_option("--seed", run.seed, "Default scenario seed");
  run_cmd->add_option("--meter", run.meter, "Meter spec: none, replay:<csv>, rapl[:<dir>] or JSON");
  run_cmd->add_option("--idle-watts", run.idle_watts, "Fixed idle baseline (W)");
  run_cmd->add_option("--intensity", run.intensity, "Carbon intensity (g CO2/kWh)");
  run_cmd->add_option("--state-file", run.state_file, "Stored idle baseline");
  run_cmd->add_option("--lock-path", run.lock_path, "Host slot lock file");
  run_cmd->add_option("--lock-transcript", run.lock_transcript, "Append slot events here");
  run_cmd->add_option("--heartbeat-s", run.heartbeat_s, "Slot heartbeat period");
  run_cmd->add_option("--queue-timeout-s", run.queue_timeout_s, "Give up waiting for the slot");
  run_cmd->add_option("--warmup", run.warmup, "Unmeasured warm-up batches");
  run_cmd->add_flag("--print-config", run.print_config, "Print the resolved config and exit");
  run_cmd->add_flag("--summary", run.summary, "Print the JSON run summary");

  std::string meter, state_file, base_lock;
  double duration = 10.0;
  auto* base_cmd = app.add_subcommand("baseline", "Record and store the idle power baseline");
  base_cmd->add_option("--meter", meter, "Meter spec")->required();
  base_cmd->add_option("--duration", duration, "Recording length (s)");
  base_cmd->add_option("--state-file", state_file, "Where to store it")->required();
  base_cmd->add_option("--lock-path", base_lock, "Host slot lock file");

  std::vector<std::string> reports;
  std::string radar_out;
  auto* report_cmd = app.add_subcommand("report", "Radar-normalize reports of one scenario");
  report_cmd->add_option("reports", reports, "Report files")->required();
  report_cmd->add_option("--json", radar_out, "Write radar JSON here (- for stdout)");

  std::string mode, model_name, fault;
  uint64_t params = 1000000, fault_at = 0;
  int startup_ms = 0, delay_ms = 0;
  bool chatter = false;
  auto* self_cmd = app.add_subcommand("selftest-model", "Serve the protocol as a built-in model");
  self_cmd->add_option("mode", mode, "echo, delay:<ms>, alloc:<MiB>, translator-toy, upper")
      ->required();
  self_cmd->add_option("--params", params, "Parameter count to announce");
  self_cmd->add_option("--name", model_name, "Model name to announce");
  self_cmd->add_option("--startup-ms", startup_ms, "Sleep before the ready line");
  self_cmd->add_flag("--chatter", chatter, "Print a non-protocol line before ready");
  self_cmd->add_option("--delay-ms", delay_ms, "Extra sleep per request");
  self_cmd->add_option("--fault", fault,
                       "short-output, bad-index, malformed, crash, hang or no-ready");
  self_cmd->add_option("--fault-at", fault_at, "Request index of the fault");

  std::string manifest, transcript;
  size_t requests = 1;
  auto* val_cmd = app.add_subcommand("validate-adapter", "Check a model's protocol conformance");
  val_cmd->add_option("manifest", manifest, "Model manifest")->required();
  val_cmd->add_option("--requests", requests, "Echo round trips");
  val_cmd->add_option("--transcript", transcript, "Write raw protocol lines here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : EB_ERR_CONFIG;
  }
  if (!log_level.empty()) {
    if (eb_status st = eb_set_log_level(log_level.c_str()); st != EB_OK) return Report(st);
  }

  if (*run_cmd) return DoRun(run);

  if (*base_cmd) {
    double idle = 0.0;
    eb_status st = eb_baseline(meter.c_str(), duration, state_file.c_str(),
                               base_lock.empty() ? nullptr : base_lock.c_str(), &idle);
    if (st == EB_OK) std::cout << "idle_watts " << idle << " -> " << state_file << "\n";
    return Report(st);
  }

  if (*report_cmd) {
    std::vector<const char*> paths;
    for (const auto& r : reports) paths.push_back(r.c_str());
    char* radar = nullptr;
    char* table = nullptr;
    eb_status st = eb_report(paths.data(), paths.size(), &radar, &table);
    std::string radar_text = Take(radar), table_text = Take(table);
    if (st != EB_OK) return Report(st);
    std::cout << table_text;
    if (radar_out == "-") {
      std::cout << radar_text << "\n";
    } else if (!radar_out.empty()) {
      std::ofstream out(radar_out);
      out << radar_text << "\n";
      if (!out) {
        std::cerr << "effbench: cannot write " << radar_out << std::endl;
        return EB_ERR_OTHER;
      }
    }
    return 0;
  }

  if (*self_cmd) {
    json opts{{"params", params}, {"startup_ms", startup_ms}, {"chatter", chatter},
              {"delay_ms", delay_ms}, {"fault", fault}, {"fault_at", fault_at}};
    if (!model_name.empty()) opts["name"] = model_name;
    return eb_selftest_model(mode.c_str(), opts.dump().c_str());
  }

  if (*val_cmd) {
    char* out = nullptr;
    eb_status st = eb_validate_adapter(manifest.c_str(), requests,
                                       transcript.empty() ? nullptr : transcript.c_str(), &out);
    std::string text = Take(out);
    if (!text.empty()) std::cout << text << "\n";
    return Report(st);
  }
  return EB_ERR_CONFIG;
}
