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

#include "app/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "common/error.hpp"
#include "metering/power.hpp"

namespace effbench::app {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "manifest",        "datasets",          "scenarios",
    "seed",            "meter",             "intensity_g_per_kwh",
    "idle_watts",      "state_file",        "baseline_duration_s",
    "output_dir",      "warmup_batches",    "accuracy_metric",
    "words_from",      "offline_target_mean_length",
    "memory_period_ms", "lock_path",        "heartbeat_s",
    "queue_timeout_s", "lock_transcript"};

std::string Absolute(const std::string& path, const std::string& base) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_relative()) p = fs::path(base.empty() ? fs::current_path().string() : base) / p;
  return p.lexically_normal().string();
}

// A value together with the directory its relative paths resolve against.
struct Layered {
  const json* value = nullptr;
  std::string base;
  explicit operator bool() const { return value != nullptr && !value->is_null(); }
};

double PositiveNumber(const json& v, const std::string& key) {
  if (!v.is_number() || !(v.get<double>() > 0.0))
    ConfigError("\"" + key + "\" must be a positive number");
  return v.get<double>();
}

double NonNegativeNumber(const json& v, const std::string& key) {
  if (!v.is_number() || v.get<double>() < 0.0)
    ConfigError("\"" + key + "\" must be a non-negative number");
  return v.get<double>();
}

std::string StringValue(const json& v, const std::string& key) {
  if (!v.is_string()) ConfigError("\"" + key + "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

bool RunConfig::HasMeter() const {
  return !(meter.is_string() && meter.get<std::string>() == "none") &&
         !(meter.is_object() && meter.value("kind", std::string()) == "none");
}

ConfigSource ConfigSource::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) ConfigError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::string dir = fs::absolute(path).parent_path().string();
  return Parse(text, dir);
}

ConfigSource ConfigSource::Parse(const std::string& text, const std::string& base_dir) {
  ConfigSource src;
  src.file = json::parse(text, nullptr, false);
  if (src.file.is_discarded()) ConfigError("config is not valid JSON");
  if (!src.file.is_object()) ConfigError("config must be a JSON object");
  for (const auto& [k, v] : src.file.items()) {
    (void)v;
    if (!kKnownKeys.count(k)) ConfigError("unknown config key \"" + k + "\"");
  }
  src.base_dir = base_dir.empty() ? fs::current_path().string() : fs::absolute(base_dir).string();
  return src;
}

void ConfigSource::Set(const std::string& key, const std::string& value) {
  if (!kKnownKeys.count(key)) ConfigError("unknown config key \"" + key + "\"");
  json v = json::parse(value, nullptr, false);
  overrides[key] = v.is_discarded() ? json(value) : v;
}

json ResolveMeterSpec(const json& spec, const std::string& base_dir) {
  json s = spec.is_string() ? metering::ParseMeterSpec(spec.get<std::string>()) : spec;
  if (s.is_object() && s.contains("path") && s["path"].is_string())
    s["path"] = Absolute(s["path"].get<std::string>(), base_dir);
  return s;
}

RunConfig ConfigSource::Resolve() const {
  const std::string cwd = fs::current_path().string();
  auto get = [&](const std::string& key) -> Layered {
    if (overrides.contains(key)) return {&overrides[key], cwd};
    if (file.contains(key)) return {&file[key], base_dir};
    return {};
  };

  RunConfig cfg;
  try {
    if (auto v = get("seed")) {
      if (!v.value->is_number_unsigned() && !(v.value->is_number_integer() && v.value->get<int64_t>() >= 0))
        ConfigError("\"seed\" must be a non-negative integer");
      cfg.seed = v.value->get<uint64_t>();
    }

    if (auto v = get("manifest")) {
      if (v.value->is_string()) {
        cfg.manifest_source = Absolute(v.value->get<std::string>(), v.base);
        cfg.manifest = runner::ModelManifest::Load(cfg.manifest_source);
      } else {
        cfg.manifest_source = "inline";
        cfg.manifest = runner::ModelManifest::FromJson(*v.value, v.base);
      }
    } else {
      ConfigError("config needs \"manifest\"");
    }

    if (auto v = get("datasets")) {
      if (!v.value->is_object()) ConfigError("\"datasets\" must be an object");
      for (const auto& [k, p] : v.value->items()) {
        if (k == "test") cfg.test_path = Absolute(StringValue(p, "datasets.test"), v.base);
        else if (k == "train") cfg.train_path = Absolute(StringValue(p, "datasets.train"), v.base);
        else ConfigError("unknown dataset split \"" + k + "\"");
      }
    }
    if (cfg.test_path.empty()) ConfigError("config needs \"datasets\": {\"test\": ...}");

    if (auto v = get("scenarios")) {
      if (!v.value->is_array() || v.value->empty())
        ConfigError("\"scenarios\" must be a non-empty list");
      for (const auto& s : *v.value) {
        json entry = s.is_string() ? json{{"kind", s.get<std::string>()}} : s;
        cfg.scenarios.push_back(ScenarioConfig::FromJson(entry, cfg.seed));
      }
    } else {
      ConfigError("config needs \"scenarios\"");
    }
    bool offline = false;
    for (const auto& s : cfg.scenarios) offline |= s.kind == ScenarioKind::kOffline;
    if (offline && cfg.train_path.empty())
      ConfigError("offline scenario needs \"datasets\": {\"train\": ...}");

    if (auto v = get("meter")) cfg.meter = ResolveMeterSpec(*v.value, v.base);
    if (auto v = get("intensity_g_per_kwh"))
      cfg.intensity_g_per_kwh = NonNegativeNumber(*v.value, "intensity_g_per_kwh");
    if (cfg.HasMeter() && !cfg.intensity_g_per_kwh)
      ConfigError("a meter is configured but \"intensity_g_per_kwh\" is missing");
    if (auto v = get("idle_watts")) cfg.idle_watts = NonNegativeNumber(*v.value, "idle_watts");
    if (auto v = get("baseline_duration_s"))
      cfg.baseline_duration_s = PositiveNumber(*v.value, "baseline_duration_s");

    if (auto v = get("output_dir")) cfg.output_dir = Absolute(StringValue(*v.value, "output_dir"), v.base);
    else cfg.output_dir = Absolute("reports", base_dir);
    if (auto v = get("state_file")) cfg.state_file = Absolute(StringValue(*v.value, "state_file"), v.base);
    else cfg.state_file = (fs::path(cfg.output_dir) / "idle_baseline.json").string();

    if (auto v = get("warmup_batches")) {
      if (!v.value->is_number_integer() || v.value->get<int64_t>() < 0)
        ConfigError("\"warmup_batches\" must be a non-negative integer");
      cfg.warmup_batches = v.value->get<int>();
    }
    if (auto v = get("accuracy_metric")) {
      std::string m = StringValue(*v.value, "accuracy_metric");
      if (m == "bleu") cfg.accuracy_metric = AccuracyMetric::kBleu;
      else if (m == "exact_match") cfg.accuracy_metric = AccuracyMetric::kExactMatch;
      else ConfigError("\"accuracy_metric\" must be \"bleu\" or \"exact_match\"");
    }
    if (auto v = get("words_from")) {
      std::string m = StringValue(*v.value, "words_from");
      if (m == "output") cfg.words_from = WordsFrom::kOutput;
      else if (m == "input") cfg.words_from = WordsFrom::kInput;
      else ConfigError("\"words_from\" must be \"output\" or \"input\"");
    }
    if (auto v = get("offline_target_mean_length"))
      cfg.offline_target_mean_length = PositiveNumber(*v.value, "offline_target_mean_length");
    if (auto v = get("memory_period_ms")) {
      if (!v.value->is_number_integer() || v.value->get<int64_t>() <= 0)
        ConfigError("\"memory_period_ms\" must be a positive integer");
      cfg.memory_period_ms = v.value->get<int>();
    }

    // Slot options. The environment sits between flags and the file.
    const char* env_lock = std::getenv("EFFBENCH_LOCK_PATH");
    if (overrides.contains("lock_path"))
      cfg.slot.lock_path = Absolute(StringValue(overrides["lock_path"], "lock_path"), cwd);
    else if (env_lock && *env_lock)
      cfg.slot.lock_path = env_lock;
    else if (file.contains("lock_path"))
      cfg.slot.lock_path = Absolute(StringValue(file["lock_path"], "lock_path"), base_dir);
    else
      cfg.slot.lock_path = scheduler::DefaultLockPath();
    if (auto v = get("heartbeat_s")) cfg.slot.heartbeat_s = PositiveNumber(*v.value, "heartbeat_s");
    if (auto v = get("queue_timeout_s"))
      cfg.slot.queue_timeout_s = PositiveNumber(*v.value, "queue_timeout_s");
    if (auto v = get("lock_transcript"))
      cfg.slot.transcript_path = Absolute(StringValue(*v.value, "lock_transcript"), v.base);
  } catch (const json::exception& e) {
    ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

}  // namespace effbench::app
