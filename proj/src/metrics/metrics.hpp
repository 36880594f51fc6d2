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

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "runner/runner.hpp"
#include "scenario/scenario.hpp"

namespace effbench::metrics {

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  size_t n = 0;

  nlohmann::json ToJson() const;
  static LatencyStats FromJson(const nlohmann::json& j);
};

/// The ceil(pct/100 * n)-th smallest value (1-based, at least the first).
double NearestRank(std::span<const double> sorted, double pct);

/// Throws EmptyInput for no samples.
LatencyStats ComputeLatencyStats(std::vector<double> latencies_ms);

/// One latency per batch: response_ts - dispatch_ts.
LatencyStats LatencyFromRecord(const runner::RunRecord& record);

struct Throughput {
  double inst_s = 0.0;
  double words_s = 0.0;
  double duration_s = 0.0;
};

/// Throws ZeroDuration when duration_s <= 0.
Throughput ComputeThroughput(uint64_t instances, uint64_t words, double duration_s);

/// Span is first dispatch to last response.
double ActiveSeconds(const runner::RunRecord& record);

/// Whitespace-delimited words across all outputs of the record.
uint64_t OutputWords(const runner::RunRecord& record);

/// Fraction of hypotheses equal (after trimming surrounding whitespace) to
/// any of their references. Throws LengthMismatch.
double ExactMatch(const std::vector<std::string>& hypotheses,
                  const std::vector<std::vector<std::string>>& references);

struct Accuracy {
  std::string metric;
  double value = 0.0;
};

/// Everything reported for one (model, scenario) run.
struct MetricsReport {
  std::string model;
  ScenarioKind scenario = ScenarioKind::kFixed;
  std::optional<double> throughput_inst_s;
  std::optional<double> throughput_words_s;
  std::optional<LatencyStats> latency;
  std::optional<double> peak_mem_gib;
  std::optional<double> gpu_mem_gib;
  std::optional<double> energy_wh;
  std::optional<double> co2_g;
  uint64_t params = 0;
  std::optional<Accuracy> accuracy;

  nlohmann::json header = nlohmann::json::object();
  nlohmann::json run = nlohmann::json::object();

  /// Nulls every metric the scenario does not report.
  void ApplyScenarioMask();

  nlohmann::json ToJson() const;
  static MetricsReport FromJson(const nlohmann::json& j);
  static MetricsReport Load(const std::string& path);
};

/// Report fields that carry a value, by metric name (accuracy, throughput,
/// latency, memory, energy, params).
std::set<std::string> PresentMetrics(const MetricsReport& report);

/// Radar chart values in [0, 1], 1 = best. Higher-is-better metrics
/// (throughput, accuracy) map to x / max; lower-is-better metrics (latency
/// p50, memory, energy, params) map to min / x, with params on a log10
/// scale. Equal values all map to 1. Missing values stay missing.
struct RadarEntry {
  std::string model;
  std::map<std::string, std::optional<double>> values;
};

std::vector<std::optional<double>> NormalizeHigherBetter(
    const std::vector<std::optional<double>>& xs);
std::vector<std::optional<double>> NormalizeLowerBetter(
    const std::vector<std::optional<double>>& xs);

/// Throws IncompatibleScenarios unless all reports share one scenario.
std::vector<RadarEntry> RadarNormalize(const std::vector<MetricsReport>& reports);

}  // namespace effbench::metrics
