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

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "scenario/dataset.hpp"

namespace effbench {

enum class ScenarioKind { kFixed, kPoisson, kSingleStream, kOffline };

std::string_view ToString(ScenarioKind kind);
/// Accepts "fixed", "poisson", "single_stream" (or "single-stream"), "offline".
ScenarioKind ParseScenarioKind(std::string_view name);
bool IsOnline(ScenarioKind kind);

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kFixed;
  uint64_t batch_size = 1;
  double poisson_mean = 0.0;
  /// Unset means the scenario default: whole test set for fixed, 4000 for
  /// poisson, 1000 for single stream, 8000 for offline.
  std::optional<uint64_t> instance_count;
  uint64_t seed = 0;

  static ScenarioConfig FromJson(const nlohmann::json& j, uint64_t default_seed);
  nlohmann::json ToJson() const;
};

/// Metric names produced per scenario: accuracy, throughput, latency,
/// memory, energy, plus params, which every scenario reports.
std::set<std::string> ScenarioMetrics(ScenarioKind kind);

struct BatchPlan {
  ScenarioConfig scenario;
  std::vector<std::vector<Instance>> batches;
  uint64_t total_instances = 0;

  /// Instances in dispatch order.
  std::vector<const Instance*> Flatten() const;
  std::vector<uint64_t> BatchSizes() const;
  /// Scenario, seed and per-batch ids.
  nlohmann::json ToJson() const;
  /// Hex FNV-1a digest of ToJson(); equal plans have equal digests.
  std::string Digest() const;
};

struct OfflineJob {
  BatchPlan plan;  // one batch holding every sampled instance
  double target_mean_length = 0.0;
  double sample_mean_length = 0.0;
  int attempts = 0;
  bool repaired = false;

  /// One escaped input per line in sampled order; output i answers line i.
  void WriteInstanceFile(const std::string& path) const;
};

/// Relative tolerance on the offline sample's mean input length.
inline constexpr double kOfflineLengthTolerance = 0.02;
inline constexpr int kOfflineMaxAttempts = 1000;

BatchPlan PlanFixed(const Dataset& data, const ScenarioConfig& cfg);
BatchPlan PlanPoisson(const Dataset& data, const ScenarioConfig& cfg);
BatchPlan PlanSingleStream(const Dataset& data, const ScenarioConfig& cfg);

/// Samples without replacement from `train` (skipping any instance whose
/// input text is in `excluded_inputs`) until the mean whitespace-token
/// length is within kOfflineLengthTolerance of `target_mean_length`.
OfflineJob PlanOffline(const Dataset& train, double target_mean_length,
                       const ScenarioConfig& cfg,
                       const std::unordered_set<std::string>& excluded_inputs = {});

/// Dispatches on cfg.kind for the online scenarios.
BatchPlan PlanOnline(const Dataset& data, const ScenarioConfig& cfg);

}  // namespace effbench
