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

// Run configuration. One JSON file; keys:
//
//   manifest             path to a model manifest, or the manifest inline
//   datasets             {"test": path, "train": path}
//   scenarios            list of scenario objects ({"kind": ..., ...})
//   seed                 default seed for scenarios that set none (0)
//   meter                meter spec or shorthand ("none")
//   intensity_g_per_kwh  required when a meter is set
//   idle_watts           fixed idle baseline; skips the state file
//   state_file           stored idle baseline (<output_dir>/idle_baseline.json)
//   baseline_duration_s  idle recording length when none is stored (10)
//   output_dir           report directory ("reports")
//   warmup_batches       unmeasured batches before online runs (0)
//   accuracy_metric      "bleu" or "exact_match" ("bleu")
//   words_from           "output" or "input" words for words/s ("output")
//   offline_target_mean_length  default: mean input length of the test set
//   memory_period_ms     RSS sampling period (50)
//   lock_path, heartbeat_s, queue_timeout_s, lock_transcript   slot options
//
// Precedence, highest first: overrides (command-line flags), environment
// (EFFBENCH_LOCK_PATH), the file, built-in defaults. Relative paths in the
// file resolve against its directory; relative override paths against the
// working directory.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "runner/runner.hpp"
#include "scenario/scenario.hpp"
#include "scheduler/scheduler.hpp"

namespace effbench::app {

enum class AccuracyMetric { kBleu, kExactMatch };
enum class WordsFrom { kOutput, kInput };

struct RunConfig {
  runner::ModelManifest manifest;
  std::string manifest_source;  // file path, or "inline"
  std::string test_path;
  std::string train_path;
  std::vector<ScenarioConfig> scenarios;
  uint64_t seed = 0;
  nlohmann::json meter = "none";
  std::optional<double> intensity_g_per_kwh;
  std::optional<double> idle_watts;
  std::string state_file;
  double baseline_duration_s = 10.0;
  std::string output_dir;
  int warmup_batches = 0;
  AccuracyMetric accuracy_metric = AccuracyMetric::kBleu;
  WordsFrom words_from = WordsFrom::kOutput;
  std::optional<double> offline_target_mean_length;
  int memory_period_ms = 50;
  scheduler::SchedulerOptions slot;

  bool HasMeter() const;
};

/// Unresolved configuration: the file plus overrides.
struct ConfigSource {
  nlohmann::json file = nlohmann::json::object();
  std::string base_dir;
  nlohmann::json overrides = nlohmann::json::object();

  static ConfigSource Load(const std::string& path);
  static ConfigSource Parse(const std::string& text, const std::string& base_dir);
  /// `value` is JSON text; anything that does not parse is taken as a string.
  void Set(const std::string& key, const std::string& value);

  /// Validates and resolves. Throws ConfigError.
  RunConfig Resolve() const;
};

/// Meter spec resolution against the config directory, as for Resolve().
nlohmann::json ResolveMeterSpec(const nlohmann::json& spec, const std::string& base_dir);

}  // namespace effbench::app
