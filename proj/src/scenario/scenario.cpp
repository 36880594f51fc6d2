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

#include "scenario/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "common/error.hpp"
#include "common/text.hpp"
#include "scenario/poisson.hpp"
#include "scenario/rng.hpp"

namespace effbench {

using json = nlohmann::json;

namespace {

constexpr uint64_t kDefaultPoissonCount = 4000;
constexpr uint64_t kDefaultSingleStreamCount = 1000;
constexpr uint64_t kDefaultOfflineCount = 8000;

void RequireKind(const ScenarioConfig& cfg, ScenarioKind kind) {
  if (cfg.kind != kind)
    ConfigError("planner for " + std::string(ToString(kind)) +
                " called with a " + std::string(ToString(cfg.kind)) +
                " config");
}

void RequireNonEmpty(const Dataset& data) {
  if (data.empty())
    Fail(ErrorClass::kConfig, "EmptyDataset", "dataset has no instances");
}

[[noreturn]] void CountExceeds(uint64_t count, size_t available) {
  Fail(ErrorClass::kConfig, "CountExceedsDataset",
       "requested " + std::to_string(count) + " instances but only " +
           std::to_string(available) + " are available");
}

// Moves a uniformly random `count`-subset of `idx` to its front, in
// sampled order.
void PartialShuffle(std::vector<size_t>& idx, size_t count, Xoshiro256& rng) {
  for (size_t i = 0; i < count; ++i) {
    size_t j = i + static_cast<size_t>(rng.NextBelow(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
}

BatchPlan GroupContiguous(const Dataset& data, const std::vector<size_t>& order,
                          size_t count, uint64_t batch_size,
                          const ScenarioConfig& cfg) {
  BatchPlan plan;
  plan.scenario = cfg;
  plan.total_instances = count;
  for (size_t start = 0; start < count; start += batch_size) {
    size_t end = std::min<size_t>(count, start + batch_size);
    std::vector<Instance> batch;
    batch.reserve(end - start);
    for (size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

}  // namespace

std::string_view ToString(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kFixed: return "fixed";
    case ScenarioKind::kPoisson: return "poisson";
    case ScenarioKind::kSingleStream: return "single_stream";
    case ScenarioKind::kOffline: return "offline";
  }
  return "unknown";
}

ScenarioKind ParseScenarioKind(std::string_view name) {
  if (name == "fixed") return ScenarioKind::kFixed;
  if (name == "poisson") return ScenarioKind::kPoisson;
  if (name == "single_stream" || name == "single-stream")
    return ScenarioKind::kSingleStream;
  if (name == "offline") return ScenarioKind::kOffline;
  ConfigError("unknown scenario kind \"" + std::string(name) + "\"");
}

bool IsOnline(ScenarioKind kind) { return kind != ScenarioKind::kOffline; }

ScenarioConfig ScenarioConfig::FromJson(const json& j, uint64_t default_seed) {
  if (!j.is_object()) ConfigError("scenario entry must be an object");
  ScenarioConfig cfg;
  if (!j.contains("kind") || !j["kind"].is_string())
    ConfigError("scenario entry needs a string \"kind\"");
  cfg.kind = ParseScenarioKind(j["kind"].get<std::string>());
  cfg.seed = j.value("seed", default_seed);

  auto positive_int = [&](const char* key) -> std::optional<uint64_t> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number_integer() || j[key].get<int64_t>() <= 0)
      ConfigError(std::string("scenario \"") + key +
                  "\" must be a positive integer");
    return j[key].get<uint64_t>();
  };

  auto batch_size = positive_int("batch_size");
  cfg.instance_count = positive_int("instance_count");
  switch (cfg.kind) {
    case ScenarioKind::kFixed:
      if (!batch_size) ConfigError("fixed scenario needs \"batch_size\"");
      cfg.batch_size = *batch_size;
      break;
    case ScenarioKind::kPoisson:
      if (j.contains("poisson_mean")) {
        if (!j["poisson_mean"].is_number())
          ConfigError("\"poisson_mean\" must be a number");
        cfg.poisson_mean = j["poisson_mean"].get<double>();
      } else if (batch_size) {
        cfg.poisson_mean = static_cast<double>(*batch_size);
      }
      if (!(cfg.poisson_mean > 0.0))
        ConfigError("poisson scenario needs \"poisson_mean\" > 0");
      cfg.batch_size = batch_size.value_or(1);
      break;
    case ScenarioKind::kSingleStream:
      cfg.batch_size = 1;
      break;
    case ScenarioKind::kOffline:
      cfg.batch_size = batch_size.value_or(1);
      break;
  }
  return cfg;
}

json ScenarioConfig::ToJson() const {
  json j;
  j["kind"] = ToString(kind);
  j["batch_size"] = batch_size;
  j["poisson_mean"] = kind == ScenarioKind::kPoisson ? json(poisson_mean) : json();
  j["instance_count"] = instance_count ? json(*instance_count) : json();
  j["seed"] = seed;
  return j;
}

std::set<std::string> ScenarioMetrics(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kFixed:
      return {"accuracy", "throughput", "latency", "memory", "energy", "params"};
    case ScenarioKind::kPoisson:
      return {"throughput", "latency", "memory", "energy", "params"};
    case ScenarioKind::kSingleStream:
      return {"latency", "memory", "energy", "params"};
    case ScenarioKind::kOffline:
      return {"throughput", "memory", "energy", "params"};
  }
  return {};
}

std::vector<const Instance*> BatchPlan::Flatten() const {
  std::vector<const Instance*> out;
  out.reserve(total_instances);
  for (const auto& b : batches)
    for (const auto& inst : b) out.push_back(&inst);
  return out;
}

std::vector<uint64_t> BatchPlan::BatchSizes() const {
  std::vector<uint64_t> out;
  out.reserve(batches.size());
  for (const auto& b : batches) out.push_back(b.size());
  return out;
}

json BatchPlan::ToJson() const {
  json j;
  j["scenario"] = scenario.ToJson();
  j["total_instances"] = total_instances;
  json batches_json = json::array();
  for (const auto& b : batches) {
    json ids = json::array();
    for (const auto& inst : b) ids.push_back(inst.id);
    batches_json.push_back(std::move(ids));
  }
  j["batches"] = std::move(batches_json);
  return j;
}

std::string BatchPlan::Digest() const { return Hex64(Fnv1a64(ToJson().dump())); }

void OfflineJob::WriteInstanceFile(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) ConfigError("cannot write offline instance file " + path);
  for (const auto& b : plan.batches)
    for (const auto& inst : b) out << EscapeLine(inst.input) << '\n';
  if (!out.flush()) ConfigError("failed writing offline instance file " + path);
}

BatchPlan PlanFixed(const Dataset& data, const ScenarioConfig& cfg) {
  RequireKind(cfg, ScenarioKind::kFixed);
  RequireNonEmpty(data);
  const size_t n = data.size();
  const uint64_t count = cfg.instance_count.value_or(n);
  if (count > n) CountExceeds(count, n);

  Xoshiro256 rng(cfg.seed);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  // Fisher-Yates, high index down.
  for (size_t i = n - 1; i > 0; --i) {
    size_t j = static_cast<size_t>(rng.NextBelow(i + 1));
    std::swap(order[i], order[j]);
  }
  return GroupContiguous(data, order, count, cfg.batch_size, cfg);
}

BatchPlan PlanPoisson(const Dataset& data, const ScenarioConfig& cfg) {
  RequireKind(cfg, ScenarioKind::kPoisson);
  RequireNonEmpty(data);
  const uint64_t count = cfg.instance_count.value_or(kDefaultPoissonCount);
  PoissonSampler sampler(cfg.poisson_mean);
  Xoshiro256 rng(cfg.seed);

  BatchPlan plan;
  plan.scenario = cfg;
  plan.total_instances = count;
  uint64_t remaining = count;
  while (remaining > 0) {
    uint64_t size = std::min(sampler.DrawPositive(rng), remaining);
    std::vector<Instance> batch;
    batch.reserve(size);
    for (uint64_t k = 0; k < size; ++k)
      batch.push_back(data[static_cast<size_t>(rng.NextBelow(data.size()))]);
    plan.batches.push_back(std::move(batch));
    remaining -= size;
  }
  return plan;
}

BatchPlan PlanSingleStream(const Dataset& data, const ScenarioConfig& cfg) {
  RequireKind(cfg, ScenarioKind::kSingleStream);
  RequireNonEmpty(data);
  const uint64_t count = cfg.instance_count.value_or(kDefaultSingleStreamCount);
  if (count > data.size()) CountExceeds(count, data.size());

  Xoshiro256 rng(cfg.seed);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  PartialShuffle(order, count, rng);
  return GroupContiguous(data, order, count, 1, cfg);
}

BatchPlan PlanOnline(const Dataset& data, const ScenarioConfig& cfg) {
  switch (cfg.kind) {
    case ScenarioKind::kFixed: return PlanFixed(data, cfg);
    case ScenarioKind::kPoisson: return PlanPoisson(data, cfg);
    case ScenarioKind::kSingleStream: return PlanSingleStream(data, cfg);
    case ScenarioKind::kOffline: break;
  }
  ConfigError("offline scenario needs PlanOffline");
}

namespace {

// Greedy repair: repeatedly swap one sampled instance for one unsampled
// instance, choosing the pair that leaves the smallest total-length error.
// Stops at the target or when no swap helps; succeeds if within tolerance.
bool RepairSample(std::vector<size_t>& sample, const std::vector<size_t>& pool,
                  const std::vector<uint64_t>& lengths, double target_total,
                  double tolerance_total) {
  std::vector<char> chosen(lengths.size(), 0);
  for (size_t idx : sample) chosen[idx] = 1;

  // length -> sample positions / unsampled pool indices
  std::map<uint64_t, std::vector<size_t>> in_by_len;
  std::map<uint64_t, std::vector<size_t>> out_by_len;
  double total = 0.0;
  for (size_t pos = 0; pos < sample.size(); ++pos) {
    in_by_len[lengths[sample[pos]]].push_back(pos);
    total += static_cast<double>(lengths[sample[pos]]);
  }
  for (size_t idx : pool)
    if (!chosen[idx]) out_by_len[lengths[idx]].push_back(idx);

  const size_t max_swaps = 4 * sample.size() + 16;
  for (size_t swap = 0; swap < max_swaps; ++swap) {
    double err = total - target_total;
    // Keep going past the tolerance edge; stop once no swap helps.
    if (std::fabs(err) < 0.5) return true;
    if (out_by_len.empty()) break;

    double best_err = std::fabs(err);
    uint64_t best_in = 0;
    uint64_t best_out = 0;
    bool found = false;
    for (const auto& [in_len, positions] : in_by_len) {
      // Ideal replacement length makes the error vanish.
      double ideal = static_cast<double>(in_len) - err;
      auto it = out_by_len.lower_bound(
          ideal <= 0 ? 0 : static_cast<uint64_t>(std::ceil(ideal)));
      for (int side = 0; side < 2; ++side) {
        auto cand = it;
        if (side == 1) {
          if (cand == out_by_len.begin()) continue;
          --cand;
        } else if (cand == out_by_len.end()) {
          continue;
        }
        double new_err = std::fabs(err - static_cast<double>(in_len) +
                                   static_cast<double>(cand->first));
        if (new_err < best_err) {
          best_err = new_err;
          best_in = in_len;
          best_out = cand->first;
          found = true;
        }
      }
    }
    if (!found) break;

    auto in_it = in_by_len.find(best_in);
    auto out_it = out_by_len.find(best_out);
    size_t pos = in_it->second.back();
    size_t replacement = out_it->second.back();
    size_t removed = sample[pos];
    in_it->second.pop_back();
    if (in_it->second.empty()) in_by_len.erase(in_it);
    out_it->second.pop_back();
    if (out_it->second.empty()) out_by_len.erase(out_it);

    sample[pos] = replacement;
    in_by_len[best_out].push_back(pos);
    out_by_len[best_in].push_back(removed);
    total += static_cast<double>(best_out) - static_cast<double>(best_in);
  }
  return std::fabs(total - target_total) <= tolerance_total;
}

}  // namespace

OfflineJob PlanOffline(const Dataset& train, double target_mean_length,
                       const ScenarioConfig& cfg,
                       const std::unordered_set<std::string>& excluded_inputs) {
  RequireKind(cfg, ScenarioKind::kOffline);
  RequireNonEmpty(train);
  if (!(target_mean_length > 0.0) || !std::isfinite(target_mean_length))
    ConfigError("offline target mean length must be positive");

  std::vector<size_t> pool;
  pool.reserve(train.size());
  for (size_t i = 0; i < train.size(); ++i)
    if (!excluded_inputs.count(train[i].input)) pool.push_back(i);

  const uint64_t count = cfg.instance_count.value_or(kDefaultOfflineCount);
  if (count > pool.size()) CountExceeds(count, pool.size());

  std::vector<uint64_t> lengths(train.size());
  for (size_t i : pool) lengths[i] = CountWords(train[i].input);

  const double target_total = target_mean_length * static_cast<double>(count);
  const double tolerance_total = kOfflineLengthTolerance * target_total;

  Xoshiro256 rng(cfg.seed);
  std::vector<size_t> best;
  double best_err = 0.0;
  int attempts = 0;
  bool matched = false;
  for (; attempts < kOfflineMaxAttempts && !matched;) {
    ++attempts;
    PartialShuffle(pool, count, rng);
    double total = 0.0;
    for (size_t k = 0; k < count; ++k) total += static_cast<double>(lengths[pool[k]]);
    double err = std::fabs(total - target_total);
    if (best.empty() || err < best_err) {
      best.assign(pool.begin(), pool.begin() + static_cast<ptrdiff_t>(count));
      best_err = err;
    }
    matched = err <= tolerance_total;
  }

  OfflineJob job;
  job.attempts = attempts;
  job.target_mean_length = target_mean_length;
  if (!matched) {
    if (!RepairSample(best, pool, lengths, target_total, tolerance_total)) {
      double total = 0.0;
      for (size_t idx : best) total += static_cast<double>(lengths[idx]);
      Fail(ErrorClass::kConfig, "LengthMatchFailure",
           "could not match mean input length " +
               std::to_string(target_mean_length) + " (best " +
               std::to_string(total / static_cast<double>(count)) + ") after " +
               std::to_string(attempts) + " attempts and greedy repair");
    }
    job.repaired = true;
  }

  std::vector<Instance> batch;
  batch.reserve(count);
  double total = 0.0;
  for (size_t idx : best) {
    batch.push_back(train[idx]);
    total += static_cast<double>(lengths[idx]);
  }
  job.sample_mean_length = total / static_cast<double>(count);
  job.plan.scenario = cfg;
  job.plan.total_instances = count;
  job.plan.batches.push_back(std::move(batch));
  return job;
}

}  // namespace effbench
