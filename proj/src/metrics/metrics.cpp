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

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace effbench::metrics {

using json = nlohmann::json;

json LatencyStats::ToJson() const {
  return json{{"mean_ms", mean_ms}, {"p50_ms", p50_ms}, {"p90_ms", p90_ms},
              {"p99_ms", p99_ms},   {"max_ms", max_ms}, {"n", n}};
}

LatencyStats LatencyStats::FromJson(const json& j) {
  LatencyStats s;
  s.mean_ms = j.at("mean_ms").get<double>();
  s.p50_ms = j.at("p50_ms").get<double>();
  s.p90_ms = j.at("p90_ms").get<double>();
  s.p99_ms = j.at("p99_ms").get<double>();
  s.max_ms = j.at("max_ms").get<double>();
  s.n = j.at("n").get<size_t>();
  return s;
}

double NearestRank(std::span<const double> sorted, double pct) {
  if (sorted.empty()) Fail(ErrorClass::kOther, "EmptyInput", "no samples");
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<size_t>(std::ceil(pct / 100.0 * n));
  rank = std::clamp<size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

LatencyStats ComputeLatencyStats(std::vector<double> latencies_ms) {
  if (latencies_ms.empty())
    Fail(ErrorClass::kOther, "EmptyInput", "latency needs at least one batch");
  std::sort(latencies_ms.begin(), latencies_ms.end());
  LatencyStats s;
  s.n = latencies_ms.size();
  double sum = 0.0;
  for (double v : latencies_ms) sum += v;
  s.mean_ms = sum / static_cast<double>(s.n);
  s.p50_ms = NearestRank(latencies_ms, 50);
  s.p90_ms = NearestRank(latencies_ms, 90);
  s.p99_ms = NearestRank(latencies_ms, 99);
  s.max_ms = latencies_ms.back();
  // Rounding in the mean can exceed a constant sample by an ulp.
  s.mean_ms = std::min(s.mean_ms, s.max_ms);
  return s;
}

LatencyStats LatencyFromRecord(const runner::RunRecord& record) {
  std::vector<double> ms;
  ms.reserve(record.batches.size());
  for (const auto& b : record.batches) ms.push_back(b.LatencySeconds() * 1000.0);
  return ComputeLatencyStats(std::move(ms));
}

Throughput ComputeThroughput(uint64_t instances, uint64_t words, double duration_s) {
  if (!(duration_s > 0.0))
    Fail(ErrorClass::kOther, "ZeroDuration", "throughput needs a positive duration");
  Throughput t;
  t.duration_s = duration_s;
  t.inst_s = static_cast<double>(instances) / duration_s;
  t.words_s = static_cast<double>(words) / duration_s;
  return t;
}

double ActiveSeconds(const runner::RunRecord& record) {
  if (record.batches.empty()) return 0.0;
  return std::chrono::duration<double>(record.batches.back().response_ts -
                                       record.batches.front().dispatch_ts)
      .count();
}

uint64_t OutputWords(const runner::RunRecord& record) {
  uint64_t words = 0;
  for (const auto& b : record.batches)
    for (const auto& o : b.outputs) words += CountWords(o);
  return words;
}

double ExactMatch(const std::vector<std::string>& hypotheses,
                  const std::vector<std::vector<std::string>>& references) {
  if (hypotheses.size() != references.size())
    Fail(ErrorClass::kOther, "LengthMismatch",
         std::to_string(hypotheses.size()) + " hypotheses but " +
             std::to_string(references.size()) + " reference sets");
  if (hypotheses.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    std::string_view h = Trim(hypotheses[i]);
    for (const auto& r : references[i]) {
      if (Trim(r) == h) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(hypotheses.size());
}

void MetricsReport::ApplyScenarioMask() {
  const auto allowed = ScenarioMetrics(scenario);
  if (!allowed.count("throughput")) {
    throughput_inst_s.reset();
    throughput_words_s.reset();
  }
  if (!allowed.count("latency")) latency.reset();
  if (!allowed.count("accuracy")) accuracy.reset();
  if (!allowed.count("memory")) {
    peak_mem_gib.reset();
    gpu_mem_gib.reset();
  }
  if (!allowed.count("energy")) {
    energy_wh.reset();
    co2_g.reset();
  }
}

namespace {

template <typename T>
json OrNull(const std::optional<T>& v) {
  return v ? json(*v) : json();
}

std::optional<double> OptDouble(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

json MetricsReport::ToJson() const {
  json j;
  j["header"] = header;
  j["model"] = model;
  j["scenario"] = ToString(scenario);
  j["throughput_inst_s"] = OrNull(throughput_inst_s);
  j["throughput_words_s"] = OrNull(throughput_words_s);
  j["latency"] = latency ? latency->ToJson() : json();
  j["peak_mem_gib"] = OrNull(peak_mem_gib);
  j["gpu_mem_gib"] = OrNull(gpu_mem_gib);
  j["energy_wh"] = OrNull(energy_wh);
  j["co2_g"] = OrNull(co2_g);
  j["params"] = params;
  j["accuracy"] = accuracy ? json{{"metric", accuracy->metric}, {"value", accuracy->value}}
                           : json();
  j["run"] = run;
  return j;
}

MetricsReport MetricsReport::FromJson(const json& j) {
  try {
    MetricsReport r;
    r.header = j.value("header", json::object());
    r.model = j.at("model").get<std::string>();
    r.scenario = ParseScenarioKind(j.at("scenario").get<std::string>());
    r.throughput_inst_s = OptDouble(j, "throughput_inst_s");
    r.throughput_words_s = OptDouble(j, "throughput_words_s");
    if (j.contains("latency") && !j["latency"].is_null())
      r.latency = LatencyStats::FromJson(j["latency"]);
    r.peak_mem_gib = OptDouble(j, "peak_mem_gib");
    r.gpu_mem_gib = OptDouble(j, "gpu_mem_gib");
    r.energy_wh = OptDouble(j, "energy_wh");
    r.co2_g = OptDouble(j, "co2_g");
    r.params = j.at("params").get<uint64_t>();
    if (j.contains("accuracy") && !j["accuracy"].is_null())
      r.accuracy = Accuracy{j["accuracy"].at("metric").get<std::string>(),
                            j["accuracy"].at("value").get<double>()};
    r.run = j.value("run", json::object());
    return r;
  } catch (const json::exception& e) {
    ConfigError(std::string("malformed report: ") + e.what());
  }
}

MetricsReport MetricsReport::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) ConfigError("cannot open report " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) ConfigError("report " + path + " is not valid JSON");
  return FromJson(j);
}

std::set<std::string> PresentMetrics(const MetricsReport& r) {
  std::set<std::string> out{"params"};
  if (r.accuracy) out.insert("accuracy");
  if (r.throughput_inst_s || r.throughput_words_s) out.insert("throughput");
  if (r.latency) out.insert("latency");
  if (r.peak_mem_gib) out.insert("memory");
  if (r.energy_wh || r.co2_g) out.insert("energy");
  return out;
}

std::vector<std::optional<double>> NormalizeHigherBetter(
    const std::vector<std::optional<double>>& xs) {
  std::optional<double> best;
  for (const auto& x : xs)
    if (x && (!best || *x > *best)) best = *x;
  std::vector<std::optional<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    if (!x) out.emplace_back();
    else if (*x == *best || *best <= 0.0) out.emplace_back(1.0);
    else out.emplace_back(std::max(0.0, *x / *best));
  }
  return out;
}

std::vector<std::optional<double>> NormalizeLowerBetter(
    const std::vector<std::optional<double>>& xs) {
  std::optional<double> best;
  for (const auto& x : xs)
    if (x && (!best || *x < *best)) best = *x;
  std::vector<std::optional<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    if (!x) out.emplace_back();
    else if (*x == *best) out.emplace_back(1.0);
    else if (*best < 0.0) out.emplace_back(0.0);
    else out.emplace_back(*best / *x);
  }
  return out;
}

std::vector<RadarEntry> RadarNormalize(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) ConfigError("radar needs at least one report");
  const ScenarioKind kind = reports.front().scenario;
  for (const auto& r : reports) {
    if (r.scenario != kind)
      Fail(ErrorClass::kConfig, "IncompatibleScenarios",
           "cannot compare " + std::string(ToString(kind)) + " with " +
               std::string(ToString(r.scenario)) + " reports");
  }
  const auto metrics = ScenarioMetrics(kind);

  std::vector<RadarEntry> out(reports.size());
  for (size_t i = 0; i < reports.size(); ++i) out[i].model = reports[i].model;

  auto column = [&](const std::string& name, bool higher_better, auto getter) {
    if (!metrics.count(name)) return;
    std::vector<std::optional<double>> xs;
    for (const auto& r : reports) xs.push_back(getter(r));
    auto norm = higher_better ? NormalizeHigherBetter(xs) : NormalizeLowerBetter(xs);
    for (size_t i = 0; i < reports.size(); ++i) out[i].values[name] = norm[i];
  };

  column("accuracy", true, [](const MetricsReport& r) -> std::optional<double> {
    return r.accuracy ? std::optional<double>(r.accuracy->value) : std::nullopt;
  });
  column("throughput", true, [](const MetricsReport& r) { return r.throughput_inst_s; });
  column("latency", false, [](const MetricsReport& r) -> std::optional<double> {
    return r.latency ? std::optional<double>(r.latency->p50_ms) : std::nullopt;
  });
  column("memory", false, [](const MetricsReport& r) { return r.peak_mem_gib; });
  column("energy", false, [](const MetricsReport& r) { return r.energy_wh; });
  column("params", false, [](const MetricsReport& r) -> std::optional<double> {
    return std::log10(std::max<double>(1.0, static_cast<double>(r.params)));
  });
  return out;
}

}  // namespace effbench::metrics
