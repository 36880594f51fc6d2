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

#include "effbench/effbench.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <memory>
#include <string>
#include <unordered_set>

#include <json.hpp>

#include "app/commands.hpp"
#include "app/config.hpp"
#include "app/selftest.hpp"
#include "common/error.hpp"
#include "common/log.hpp"
#include "common/text.hpp"
#include "metering/power.hpp"
#include "metrics/bleu.hpp"
#include "metrics/metrics.hpp"
#include "scenario/dataset.hpp"
#include "scenario/scenario.hpp"
#include "scheduler/scheduler.hpp"

using json = nlohmann::json;

struct eb_dataset {
  effbench::Dataset data;
};

struct eb_plan {
  effbench::BatchPlan plan;
  double sample_mean_length = 0.0;
};

struct eb_slot {
  std::optional<effbench::scheduler::JobTicket> ticket;
};

struct eb_config {
  effbench::app::ConfigSource source;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_kind;

void ClearError() {
  g_error.clear();
  g_kind.clear();
}

eb_status SetError(int cls, const std::string& kind, const std::string& msg) {
  g_kind = kind;
  g_error = msg;
  return static_cast<eb_status>(cls);
}

template <typename F>
eb_status Guard(F&& body) {
  ClearError();
  try {
    body();
    return EB_OK;
  } catch (const effbench::Error& e) {
    return SetError(static_cast<int>(e.error_class()), e.kind(), e.what());
  } catch (const json::exception& e) {
    return SetError(EB_ERR_CONFIG, "ConfigError", std::string("ConfigError: ") + e.what());
  } catch (const std::bad_alloc&) {
    return SetError(EB_ERR_OTHER, "OutOfMemory", "OutOfMemory: allocation failed");
  } catch (const std::exception& e) {
    return SetError(EB_ERR_OTHER, "Internal", std::string("Internal: ") + e.what());
  }
}

void Require(const void* p, const char* what) {
  if (p == nullptr) effbench::ConfigError(std::string(what) + " must not be NULL");
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json ParseJson(const char* text, const char* what) {
  Require(text, what);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) effbench::ConfigError(std::string(what) + " is not valid JSON");
  return j;
}

void ParseCorpus(const char* hyps_json, const char* refs_json, std::vector<std::string>& hyps,
                 std::vector<std::vector<std::string>>& refs) {
  hyps = ParseJson(hyps_json, "hypotheses").get<std::vector<std::string>>();
  refs = ParseJson(refs_json, "references").get<std::vector<std::vector<std::string>>>();
}

json ResolvedToJson(const effbench::app::RunConfig& c) {
  json scenarios = json::array();
  for (const auto& s : c.scenarios) scenarios.push_back(s.ToJson());
  return {{"manifest", c.manifest_source},
          {"model", c.manifest.ToJson()},
          {"datasets", {{"test", c.test_path}, {"train", c.train_path}}},
          {"scenarios", scenarios},
          {"seed", c.seed},
          {"meter", c.meter},
          {"intensity_g_per_kwh", c.intensity_g_per_kwh ? json(*c.intensity_g_per_kwh) : json()},
          {"idle_watts", c.idle_watts ? json(*c.idle_watts) : json()},
          {"state_file", c.state_file},
          {"baseline_duration_s", c.baseline_duration_s},
          {"output_dir", c.output_dir},
          {"warmup_batches", c.warmup_batches},
          {"accuracy_metric",
           c.accuracy_metric == effbench::app::AccuracyMetric::kBleu ? "bleu" : "exact_match"},
          {"words_from", c.words_from == effbench::app::WordsFrom::kOutput ? "output" : "input"},
          {"memory_period_ms", c.memory_period_ms},
          {"lock_path", c.slot.lock_path},
          {"heartbeat_s", c.slot.heartbeat_s},
          {"queue_timeout_s", c.slot.queue_timeout_s ? json(*c.slot.queue_timeout_s) : json()},
          {"lock_transcript", c.slot.transcript_path}};
}

}  // namespace

extern "C" {

const char* eb_version(void) { return effbench::app::kHarnessVersion; }
const char* eb_last_error(void) { return g_error.c_str(); }
const char* eb_last_error_kind(void) { return g_kind.c_str(); }
void eb_string_free(char* s) { std::free(s); }

eb_status eb_set_log_level(const char* level) {
  return Guard([&] {
    Require(level, "level");
    using effbench::log::Level;
    std::string l = level;
    if (l == "debug") effbench::log::SetLevel(Level::kDebug);
    else if (l == "info") effbench::log::SetLevel(Level::kInfo);
    else if (l == "warn") effbench::log::SetLevel(Level::kWarn);
    else if (l == "error") effbench::log::SetLevel(Level::kError);
    else if (l == "off") effbench::log::SetLevel(Level::kOff);
    else effbench::ConfigError("unknown log level \"" + l + "\"");
  });
}

eb_status eb_dataset_load(const char* path, eb_dataset** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = new eb_dataset{effbench::Dataset::Load(path)};
  });
}

eb_status eb_dataset_parse(const char* jsonl, eb_dataset** out) {
  return Guard([&] {
    Require(jsonl, "jsonl");
    Require(out, "out");
    *out = new eb_dataset{effbench::Dataset::Parse(jsonl)};
  });
}

size_t eb_dataset_size(const eb_dataset* ds) { return ds ? ds->data.size() : 0; }
double eb_dataset_mean_input_length(const eb_dataset* ds) {
  return ds && !ds->data.empty() ? ds->data.MeanInputLength() : 0.0;
}
void eb_dataset_free(eb_dataset* ds) { delete ds; }

eb_status eb_plan_create(const eb_dataset* test, const char* scenario_json, eb_plan** out) {
  return Guard([&] {
    Require(test, "dataset");
    Require(out, "out");
    auto cfg = effbench::ScenarioConfig::FromJson(ParseJson(scenario_json, "scenario"), 0);
    if (cfg.kind == effbench::ScenarioKind::kOffline)
      effbench::ConfigError("offline plans need eb_plan_create_offline");
    *out = new eb_plan{effbench::PlanOnline(test->data, cfg), 0.0};
  });
}

eb_status eb_plan_create_offline(const eb_dataset* train, double target_mean_length,
                                 const char* scenario_json, const eb_dataset* exclude,
                                 eb_plan** out) {
  return Guard([&] {
    Require(train, "train");
    Require(out, "out");
    json sj = ParseJson(scenario_json, "scenario");
    if (!sj.contains("kind")) sj["kind"] = "offline";
    auto cfg = effbench::ScenarioConfig::FromJson(sj, 0);
    if (cfg.kind != effbench::ScenarioKind::kOffline)
      effbench::ConfigError("eb_plan_create_offline needs an offline scenario");
    std::unordered_set<std::string> excluded;
    if (exclude)
      for (const auto& inst : exclude->data.instances()) excluded.insert(inst.input);
    auto job = effbench::PlanOffline(train->data, target_mean_length, cfg, excluded);
    *out = new eb_plan{std::move(job.plan), job.sample_mean_length};
  });
}

size_t eb_plan_batch_count(const eb_plan* plan) { return plan ? plan->plan.batches.size() : 0; }
size_t eb_plan_batch_size(const eb_plan* plan, size_t batch) {
  if (!plan || batch >= plan->plan.batches.size()) return 0;
  return plan->plan.batches[batch].size();
}
uint64_t eb_plan_total_instances(const eb_plan* plan) {
  return plan ? plan->plan.total_instances : 0;
}
double eb_plan_sample_mean_length(const eb_plan* plan) {
  return plan ? plan->sample_mean_length : 0.0;
}

eb_status eb_plan_to_json(const eb_plan* plan, char** out) {
  return Guard([&] {
    Require(plan, "plan");
    Require(out, "out");
    *out = Dup(plan->plan.ToJson().dump());
  });
}

void eb_plan_free(eb_plan* plan) { delete plan; }

eb_status eb_corpus_bleu(const char* hypotheses_json, const char* references_json,
                         double* score) {
  return Guard([&] {
    Require(score, "score");
    std::vector<std::string> hyps;
    std::vector<std::vector<std::string>> refs;
    ParseCorpus(hypotheses_json, references_json, hyps, refs);
    *score = effbench::metrics::CorpusBleu(hyps, refs);
  });
}

eb_status eb_exact_match(const char* hypotheses_json, const char* references_json,
                         double* fraction) {
  return Guard([&] {
    Require(fraction, "fraction");
    std::vector<std::string> hyps;
    std::vector<std::vector<std::string>> refs;
    ParseCorpus(hypotheses_json, references_json, hyps, refs);
    *fraction = effbench::metrics::ExactMatch(hyps, refs);
  });
}

size_t eb_count_words(const char* text) { return text ? effbench::CountWords(text) : 0; }

eb_status eb_integrate_energy(const double* t_s, const double* watts, size_t n,
                              double idle_watts, double start_s, double end_s,
                              double* energy_wh) {
  return Guard([&] {
    Require(energy_wh, "energy_wh");
    if (n > 0) {
      Require(t_s, "t_s");
      Require(watts, "watts");
    }
    effbench::metering::PowerTrace trace;
    for (size_t i = 0; i < n; ++i) {
      if (i > 0 && !(t_s[i] > t_s[i - 1]))
        effbench::Fail(effbench::ErrorClass::kMetering, "TraceFormat",
                       "sample times must be strictly increasing");
      trace.samples.push_back({t_s[i], watts[i]});
    }
    trace.idle_watts = idle_watts;
    *energy_wh = effbench::metering::IntegrateEnergy(trace, start_s, end_s).energy_wh;
  });
}

double eb_co2_from_energy(double energy_wh, double intensity_g_per_kwh) {
  return effbench::metering::Co2FromEnergy(energy_wh, intensity_g_per_kwh);
}

eb_status eb_slot_acquire(const char* job_id, const char* lock_path, double heartbeat_s,
                          double queue_timeout_s, const char* transcript_path, eb_slot** out) {
  return Guard([&] {
    Require(out, "out");
    effbench::scheduler::SchedulerOptions opts;
    if (lock_path) opts.lock_path = lock_path;
    if (heartbeat_s > 0.0) opts.heartbeat_s = heartbeat_s;
    if (queue_timeout_s > 0.0) opts.queue_timeout_s = queue_timeout_s;
    if (transcript_path) opts.transcript_path = transcript_path;
    auto slot = std::make_unique<eb_slot>();
    slot->ticket.emplace(effbench::scheduler::Acquire(job_id ? job_id : "", opts));
    *out = slot.release();
  });
}

eb_status eb_slot_release(eb_slot* slot, int failed) {
  return Guard([&] {
    if (slot == nullptr || !slot->ticket)
      effbench::Fail(effbench::ErrorClass::kOther, "NotHolder", "no slot held");
    effbench::scheduler::Release(*slot->ticket, failed != 0);
  });
}

void eb_slot_free(eb_slot* slot) { delete slot; }

eb_status eb_config_load(const char* path, eb_config** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = new eb_config{effbench::app::ConfigSource::Load(path)};
  });
}

eb_status eb_config_parse(const char* json_text, const char* base_dir, eb_config** out) {
  return Guard([&] {
    Require(json_text, "json_text");
    Require(out, "out");
    *out = new eb_config{effbench::app::ConfigSource::Parse(json_text, base_dir ? base_dir : "")};
  });
}

eb_status eb_config_set(eb_config* config, const char* key, const char* value) {
  return Guard([&] {
    Require(config, "config");
    Require(key, "key");
    Require(value, "value");
    config->source.Set(key, value);
  });
}

eb_status eb_config_resolve(const eb_config* config, char** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    *out = Dup(ResolvedToJson(config->source.Resolve()).dump(2));
  });
}

void eb_config_free(eb_config* config) { delete config; }

eb_status eb_run(const eb_config* config, char** summary_json) {
  effbench::app::RunSummary summary;
  eb_status st = Guard([&] {
    Require(config, "config");
    summary = effbench::app::CmdRun(config->source.Resolve());
  });
  if (st != EB_OK) return st;
  if (summary_json) *summary_json = Dup(summary.ToJson().dump(2));
  if (summary.exit_code != 0) {
    for (const auto& s : summary.scenarios)
      if (!s.ok())
        return SetError(summary.exit_code, s.error->kind(), s.error->what());
  }
  return EB_OK;
}

eb_status eb_baseline(const char* meter_spec, double duration_s, const char* state_file,
                      const char* lock_path, double* idle_watts) {
  return Guard([&] {
    Require(meter_spec, "meter_spec");
    Require(state_file, "state_file");
    effbench::scheduler::SchedulerOptions slot;
    if (lock_path) slot.lock_path = lock_path;
    json spec = effbench::app::ResolveMeterSpec(json(std::string(meter_spec)), "");
    auto r = effbench::app::CmdBaseline(spec, duration_s, state_file, slot);
    if (idle_watts) *idle_watts = r.idle_watts;
  });
}

eb_status eb_report(const char* const* report_paths, size_t n, char** radar_json,
                    char** table_text) {
  return Guard([&] {
    std::vector<std::string> paths;
    for (size_t i = 0; i < n; ++i) {
      Require(report_paths[i], "report path");
      paths.emplace_back(report_paths[i]);
    }
    auto r = effbench::app::CmdReport(paths);
    if (radar_json) *radar_json = Dup(r.radar.dump(2));
    if (table_text) *table_text = Dup(r.table);
  });
}

eb_status eb_validate_adapter(const char* manifest_path, size_t requests,
                              const char* transcript_path, char** result_json) {
  effbench::app::ValidationResult r;
  eb_status st = Guard([&] {
    Require(manifest_path, "manifest_path");
    r = effbench::app::CmdValidateAdapter(manifest_path, requests,
                                          transcript_path ? transcript_path : "");
  });
  if (st != EB_OK) return st;
  if (result_json) *result_json = Dup(r.details.dump(2));
  if (r.exit_code != 0)
    return SetError(r.exit_code, r.details.value("error_kind", std::string()),
                    r.details.value("error", std::string()));
  return EB_OK;
}

int eb_selftest_model(const char* mode, const char* options_json) {
  int code = 0;
  eb_status st = Guard([&] {
    Require(mode, "mode");
    json opts = options_json && *options_json ? ParseJson(options_json, "options") : json();
    auto o = effbench::app::SelftestOptions::FromJson(mode, opts);
    std::ios::sync_with_stdio(false);
    code = effbench::app::RunSelftestModel(o, std::cin, std::cout);
  });
  if (st != EB_OK) {
    std::cerr << "selftest: " << g_error << std::endl;
    return static_cast<int>(st);
  }
  return code;
}

}  // extern "C"
