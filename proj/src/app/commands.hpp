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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "app/config.hpp"
#include "common/error.hpp"

namespace effbench::app {

inline constexpr const char* kHarnessVersion = "0.1.0";

struct ScenarioResult {
  std::string scenario;
  std::string report_path;  // timestamped artifact
  std::string latest_path;  // <model>.<scenario>.report.json
  std::string sidecar_path;
  std::optional<Error> error;
  bool ok() const { return !error.has_value(); }
};

struct RunSummary {
  std::vector<ScenarioResult> scenarios;
  /// 0 iff every scenario succeeded, else the class of the first failure.
  int exit_code = 0;
  nlohmann::json ToJson() const;
};

/// Loads data and builds every plan first, so configuration problems surface
/// before any model is started. Then runs the scenarios one after another,
/// each inside the host slot. Throws only for failures that precede the
/// first scenario.
RunSummary CmdRun(const RunConfig& config);

struct BaselineResult {
  double idle_watts = 0.0;
  std::string state_file;
};

/// Records an idle baseline while holding the slot and stores it.
BaselineResult CmdBaseline(const nlohmann::json& meter_spec, double duration_s,
                           const std::string& state_file,
                           const scheduler::SchedulerOptions& slot);

/// Reads a stored baseline; nullopt if the file does not exist.
std::optional<double> LoadIdleBaseline(const std::string& state_file);

struct ReportResult {
  nlohmann::json radar;
  std::string table;
};

ReportResult CmdReport(const std::vector<std::string>& report_paths);

struct ValidationResult {
  nlohmann::json details;
  int exit_code = 0;
};

/// Starts the manifest's model, checks the handshake and `requests` echo
/// round trips, and shuts it down. Raw request/response lines go to
/// `transcript_path` when given.
ValidationResult CmdValidateAdapter(const std::string& manifest_path, size_t requests,
                                    const std::string& transcript_path);

/// Deterministic request batches used by validate-adapter.
std::vector<std::vector<std::string>> ValidationBatches(size_t requests);

}  // namespace effbench::app
