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

#include "app/commands.hpp"

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_set>

#include "common/log.hpp"
#include "common/text.hpp"
#include "metering/memory.hpp"
#include "metering/power.hpp"
#include "metrics/bleu.hpp"
#include "metrics/metrics.hpp"
#include "runner/runner.hpp"
#include "scheduler/scheduler.hpp"

namespace effbench::app {

namespace fs = std::filesystem;
using json = nlohmann::json;
using runner::Clock;

namespace {

std::string IsoUtc(std::chrono::system_clock::time_point tp, bool compact = false) {
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::strftime(buf, sizeof(buf), compact ? "%Y%m%dT%H%M%S" : "%Y-%m-%dT%H:%M:%S", &tm);
  char out[80];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms % 1000));
  return out;
}

std::string SafeName(const std::string& name) {
  std::string out;
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("model") : out;
}

void WriteAtomically(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) Fail(ErrorClass::kOther, "WriteFailed", "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) Fail(ErrorClass::kOther, "WriteFailed", "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    Fail(ErrorClass::kOther, "WriteFailed", "cannot rename onto " + path.string());
  }
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return json();
  json j = json::parse(in, nullptr, false);
  return j.is_discarded() ? json() : j;
}

double Seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

// What the measurement hooks collect during one run.
struct Measurement {
  metering::PowerMeter* meter = nullptr;
  Clock::time_point meter_t0;
  bool meter_started = false;
  std::vector<metering::PowerSample> samples;
  double window_end_s = 0.0;
  std::unique_ptr<metering::MemorySampler> memory;
  uint64_t peak_rss = 0;
};

runner::RunHooks MakeHooks(Measurement& m, pid_t model_pid, int memory_period_ms) {
  runner::RunHooks hooks;
  hooks.on_measure_start = [&m, model_pid, memory_period_ms](const runner::RunRecord&) {
    if (m.meter) {
      m.meter->Start();
      m.meter_t0 = Clock::now();
      m.meter_started = true;
    }
    m.memory = std::make_unique<metering::MemorySampler>(model_pid, memory_period_ms);
    m.memory->Start();
  };
  hooks.on_measure_end = [&m](const runner::RunRecord& record) {
    if (m.memory) m.peak_rss = m.memory->Stop();
    if (m.meter_started) {
      m.window_end_s = std::max(0.0, Seconds(record.run_end - m.meter_t0));
      m.samples = m.meter->Stop(m.window_end_s);
      m.meter_started = false;
    }
  };
  return hooks;
}

struct IdleBaseline {
  std::optional<double> watts;
  std::string source;
};

void StoreIdleBaseline(const std::string& state_file, double watts, const json& meter,
                       double duration_s) {
  fs::path p(state_file);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  json j{{"idle_watts", watts},
         {"meter", meter},
         {"duration_s", duration_s},
         {"measured_at", IsoUtc(std::chrono::system_clock::now())}};
  WriteAtomically(p, j.dump(2) + "\n");
}

// Config value, then the stored session baseline, then a fresh measurement.
IdleBaseline ResolveIdle(const RunConfig& cfg, metering::PowerMeter* meter) {
  if (cfg.idle_watts) return {cfg.idle_watts, "config"};
  if (auto stored = LoadIdleBaseline(cfg.state_file)) return {stored, "state_file"};
  if (meter == nullptr) return {std::nullopt, "none"};
  log::Info("no stored idle baseline; recording ", cfg.baseline_duration_s, " s");
  double watts = metering::MeasureIdleBaseline(meter, cfg.baseline_duration_s);
  StoreIdleBaseline(cfg.state_file, watts, cfg.meter, cfg.baseline_duration_s);
  return {watts, "measured"};
}

struct PreparedScenario {
  ScenarioConfig config;
  BatchPlan plan;
  std::optional<OfflineJob> offline;
};

uint64_t InputWords(const BatchPlan& plan) {
  uint64_t words = 0;
  for (const auto& b : plan.batches)
    for (const auto& inst : b) words += CountWords(inst.input);
  return words;
}

// Unique stem <model>.<scenario>.<timestamp>[-k] inside `dir`.
std::string ReportStem(const fs::path& dir, const std::string& base) {
  const std::string ts = IsoUtc(std::chrono::system_clock::now(), true);
  std::string stem = base + "." + ts;
  for (int k = 1; fs::exists(dir / (stem + ".report.json")); ++k)
    stem = base + "." + ts + "-" + std::to_string(k);
  return stem;
}

ScenarioResult RunScenario(const RunConfig& cfg, const PreparedScenario& prep,
                           metering::PowerMeter* meter) {
  ScenarioResult result;
  result.scenario = std::string(ToString(prep.config.kind));
  const fs::path out_dir(cfg.output_dir);

  const std::string job_id =
      SafeName(cfg.manifest.name.empty() ? "model" : cfg.manifest.name) + "/" + result.scenario;
  scheduler::JobTicket ticket = scheduler::Acquire(job_id, cfg.slot);

  IdleBaseline idle = ResolveIdle(cfg, meter);
  if (meter == nullptr) log::Warn("no power meter configured; energy is not reported");

  const auto wall_start = std::chrono::system_clock::now();
  runner::ModelConnection conn = runner::ModelConnection::Open(cfg.manifest);
  const std::string model =
      SafeName(cfg.manifest.name.empty() ? conn.ready().model_name : cfg.manifest.name);
  const std::string base = model + "." + result.scenario;
  const std::string stem = ReportStem(out_dir, base);

  Measurement m;
  m.meter = meter;
  runner::RunOptions opts;
  opts.hooks = MakeHooks(m, conn.pid(), cfg.memory_period_ms);

  runner::RunOutcome outcome;
  fs::path instance_file;
  if (prep.offline) {
    fs::path work = out_dir / ".work";
    fs::create_directories(work);
    instance_file = work / (stem + ".instances.txt");
    prep.offline->WriteInstanceFile(instance_file.string());
    outcome = runner::RunOffline(conn, *prep.offline, instance_file.string(), opts);
  } else {
    opts.warmup_batches = cfg.warmup_batches;
    outcome = runner::RunOnline(conn, prep.plan, opts);
  }
  outcome.record.exit_status = conn.Finish();
  outcome.record.peak_rss_bytes = m.peak_rss;
  if (!instance_file.empty()) {
    std::error_code ec;
    fs::remove(instance_file, ec);
  }
  if (!outcome.ok()) throw *outcome.error;
  const auto wall_end = std::chrono::system_clock::now();
  const runner::RunRecord& rec = outcome.record;

  metrics::MetricsReport report;
  report.model = model;
  report.scenario = prep.config.kind;
  report.params = conn.params();

  const uint64_t instances = rec.TotalInstances();
  const uint64_t words =
      cfg.words_from == WordsFrom::kOutput ? metrics::OutputWords(rec) : InputWords(prep.plan);
  const double active_s = metrics::ActiveSeconds(rec);
  if (active_s > 0.0) {
    auto tp = metrics::ComputeThroughput(instances, words, active_s);
    report.throughput_inst_s = tp.inst_s;
    report.throughput_words_s = tp.words_s;
  }
  if (!rec.batches.empty()) report.latency = metrics::LatencyFromRecord(rec);
  report.peak_mem_gib = static_cast<double>(rec.peak_rss_bytes) / metering::kBytesPerGiB;

  std::vector<std::string> hyps;
  for (const auto& b : rec.batches)
    for (const auto& o : b.outputs) hyps.push_back(o);

  if (ScenarioMetrics(prep.config.kind).count("accuracy")) {
    std::vector<std::vector<std::string>> refs;
    for (const Instance* inst : prep.plan.Flatten()) refs.push_back(inst->references);
    if (cfg.accuracy_metric == AccuracyMetric::kBleu)
      report.accuracy = metrics::Accuracy{"bleu", metrics::CorpusBleu(hyps, refs)};
    else
      report.accuracy = metrics::Accuracy{"exact_match", metrics::ExactMatch(hyps, refs)};
  }

  json energy_info;
  if (meter != nullptr && idle.watts) {
    metering::PowerTrace trace;
    trace.samples = m.samples;
    trace.idle_watts = *idle.watts;
    trace.sampling_period_s = meter->SamplingPeriod();
    trace.meter_error_frac = meter->ErrorFrac();
    auto e = metering::IntegrateEnergy(trace, 0.0, m.window_end_s);
    report.energy_wh = e.energy_wh;
    report.co2_g = metering::Co2FromEnergy(e.energy_wh, *cfg.intensity_g_per_kwh);
    energy_info = {{"window_s", m.window_end_s},
                   {"samples", trace.samples.size()},
                   {"meter_error_frac", trace.meter_error_frac}};
  }
  report.ApplyScenarioMask();

  report.header = {
      {"harness_version", kHarnessVersion},
      {"seed", prep.config.seed},
      {"idle_watts", idle.watts ? json(*idle.watts) : json()},
      {"idle_source", idle.source},
      {"intensity_g_per_kwh",
       cfg.intensity_g_per_kwh ? json(*cfg.intensity_g_per_kwh) : json()},
      {"meter", meter ? json(meter->Describe()) : json()},
      {"scenario_config", prep.config.ToJson()},
      {"plan_digest", prep.plan.Digest()},
      {"timestamps", {{"start", IsoUtc(wall_start)}, {"end", IsoUtc(wall_end)}}}};
  report.run = {{"instances", instances},
                {"batches", rec.batches.size()},
                {"words", words},
                {"words_from", cfg.words_from == WordsFrom::kOutput ? "output" : "input"},
                {"active_s", active_s},
                {"warmup_batches", prep.offline ? 0 : cfg.warmup_batches},
                {"exit_status", rec.exit_status},
                {"energy", energy_info}};
  if (prep.offline)
    report.run["offline"] = {{"target_mean_length", prep.offline->target_mean_length},
                             {"sample_mean_length", prep.offline->sample_mean_length},
                             {"attempts", prep.offline->attempts},
                             {"repaired", prep.offline->repaired}};

  json sidecar;
  sidecar["plan"] = prep.plan.ToJson();
  sidecar["outputs"] = hyps;
  json lat = json::array();
  for (const auto& b : rec.batches) lat.push_back(b.LatencySeconds() * 1000.0);
  sidecar["latencies_ms"] = lat;

  const std::string report_text = report.ToJson().dump(2) + "\n";
  result.report_path = (out_dir / (stem + ".report.json")).string();
  result.sidecar_path = (out_dir / (stem + ".run.json")).string();
  result.latest_path = (out_dir / (base + ".report.json")).string();
  WriteAtomically(result.sidecar_path, sidecar.dump() + "\n");
  WriteAtomically(result.report_path, report_text);
  WriteAtomically(result.latest_path, report_text);

  const fs::path index_path = out_dir / "index.json";
  json index = ReadJsonFile(index_path);
  if (!index.is_object()) index = json::object();
  json& entry = index[base];
  entry["latest"] = stem + ".report.json";
  if (!entry.contains("history") || !entry["history"].is_array()) entry["history"] = json::array();
  entry["history"].push_back(stem + ".report.json");
  WriteAtomically(index_path, index.dump(2) + "\n");

  scheduler::Release(ticket);
  return result;
}

}  // namespace

json RunSummary::ToJson() const {
  json j;
  j["exit_code"] = exit_code;
  j["scenarios"] = json::array();
  for (const auto& s : scenarios) {
    json e{{"scenario", s.scenario}, {"ok", s.ok()}};
    if (s.ok()) {
      e["report"] = s.report_path;
      e["latest"] = s.latest_path;
      e["run"] = s.sidecar_path;
    } else {
      e["error_kind"] = s.error->kind();
      e["error"] = s.error->what();
    }
    j["scenarios"].push_back(e);
  }
  return j;
}

std::optional<double> LoadIdleBaseline(const std::string& state_file) {
  if (state_file.empty() || !fs::exists(state_file)) return std::nullopt;
  json j = ReadJsonFile(state_file);
  if (!j.is_object() || !j.contains("idle_watts") || !j["idle_watts"].is_number())
    ConfigError("state file " + state_file + " has no numeric \"idle_watts\"");
  return j["idle_watts"].get<double>();
}

RunSummary CmdRun(const RunConfig& cfg) {
  Dataset test = Dataset::Load(cfg.test_path);
  if (test.empty()) Fail(ErrorClass::kConfig, "EmptyDataset", cfg.test_path + " has no instances");
  std::optional<Dataset> train;
  if (!cfg.train_path.empty()) {
    bool needed = false;
    for (const auto& s : cfg.scenarios) needed |= s.kind == ScenarioKind::kOffline;
    if (needed) train = Dataset::Load(cfg.train_path);
  }
  std::unique_ptr<metering::PowerMeter> meter = metering::MakeMeter(cfg.meter);

  std::vector<PreparedScenario> prepared;
  for (const auto& sc : cfg.scenarios) {
    PreparedScenario p;
    p.config = sc;
    if (sc.kind == ScenarioKind::kOffline) {
      std::unordered_set<std::string> excluded;
      for (const auto& inst : test.instances()) excluded.insert(inst.input);
      const double target = cfg.offline_target_mean_length.value_or(test.MeanInputLength());
      p.offline = PlanOffline(*train, target, sc, excluded);
      p.plan = p.offline->plan;
    } else {
      p.plan = PlanOnline(test, sc);
    }
    if (ScenarioMetrics(sc.kind).count("accuracy")) {
      for (const Instance* inst : p.plan.Flatten())
        if (inst->references.empty())
          ConfigError("instance \"" + inst->id + "\" has no references; " +
                      std::string(ToString(sc.kind)) + " reports accuracy");
    }
    prepared.push_back(std::move(p));
  }

  fs::create_directories(cfg.output_dir);
  if (!cfg.manifest.setup_command.empty()) runner::RunSetupCommand(cfg.manifest);

  RunSummary summary;
  for (const auto& p : prepared) {
    try {
      summary.scenarios.push_back(RunScenario(cfg, p, meter.get()));
      log::Info(ToString(p.config.kind), " report: ", summary.scenarios.back().report_path);
    } catch (const Error& e) {
      ScenarioResult failed;
      failed.scenario = std::string(ToString(p.config.kind));
      failed.error = e;
      log::Error(failed.scenario, " failed: ", e.what());
      summary.scenarios.push_back(std::move(failed));
      if (summary.exit_code == 0) summary.exit_code = static_cast<int>(e.error_class());
    }
  }
  return summary;
}

BaselineResult CmdBaseline(const json& meter_spec, double duration_s,
                           const std::string& state_file,
                           const scheduler::SchedulerOptions& slot) {
  if (state_file.empty()) ConfigError("baseline needs a state file");
  auto meter = metering::MakeMeter(meter_spec);
  if (meter == nullptr)
    Fail(ErrorClass::kMetering, "MeterUnavailable", "no power meter configured");
  scheduler::JobTicket ticket = scheduler::Acquire("baseline", slot);
  BaselineResult r;
  r.idle_watts = metering::MeasureIdleBaseline(meter.get(), duration_s);
  r.state_file = state_file;
  StoreIdleBaseline(state_file, r.idle_watts, meter_spec, duration_s);
  scheduler::Release(ticket);
  return r;
}

ReportResult CmdReport(const std::vector<std::string>& paths) {
  if (paths.empty()) ConfigError("report needs at least one report file");
  std::vector<metrics::MetricsReport> reports;
  for (const auto& p : paths) reports.push_back(metrics::MetricsReport::Load(p));
  auto radar = metrics::RadarNormalize(reports);
  const ScenarioKind kind = reports.front().scenario;

  static const char* kOrder[] = {"accuracy", "throughput", "latency", "memory", "energy", "params"};
  std::vector<std::string> names;
  const auto metric_set = ScenarioMetrics(kind);
  for (const char* n : kOrder)
    if (metric_set.count(n)) names.push_back(n);

  auto raw = [](const metrics::MetricsReport& r, const std::string& name) -> std::optional<double> {
    if (name == "accuracy") return r.accuracy ? std::optional<double>(r.accuracy->value) : std::nullopt;
    if (name == "throughput") return r.throughput_inst_s;
    if (name == "latency") return r.latency ? std::optional<double>(r.latency->p50_ms) : std::nullopt;
    if (name == "memory") return r.peak_mem_gib;
    if (name == "energy") return r.energy_wh;
    return static_cast<double>(r.params);
  };

  ReportResult out;
  out.radar = {{"scenario", std::string(ToString(kind))}, {"metrics", names}, {"models", json::array()}};
  for (size_t i = 0; i < reports.size(); ++i) {
    json values = json::object(), raws = json::object();
    for (const auto& n : names) {
      auto v = radar[i].values[n];
      values[n] = v ? json(*v) : json();
      auto r = raw(reports[i], n);
      raws[n] = r ? json(*r) : json();
    }
    out.radar["models"].push_back({{"model", radar[i].model}, {"values", values}, {"raw", raws}});
  }

  static const std::map<std::string, std::string> kHeadings = {
      {"accuracy", "accuracy"},      {"throughput", "inst/s"}, {"latency", "p50 ms"},
      {"memory", "peak GiB"},        {"energy", "Wh"},         {"params", "params"}};
  std::ostringstream t;
  char cell[64];
  t << "scenario: " << ToString(kind) << "\n";
  std::snprintf(cell, sizeof(cell), "%-24s", "model");
  t << cell;
  for (const auto& n : names) {
    std::snprintf(cell, sizeof(cell), " %20s", kHeadings.at(n).c_str());
    t << cell;
  }
  t << "\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    std::snprintf(cell, sizeof(cell), "%-24s", reports[i].model.c_str());
    t << cell;
    for (const auto& n : names) {
      auto r = raw(reports[i], n);
      auto v = radar[i].values[n];
      if (r && v) std::snprintf(cell, sizeof(cell), " %12.4g (%4.2f)", *r, *v);
      else std::snprintf(cell, sizeof(cell), " %20s", "n/a");
      t << cell;
    }
    t << "\n";
  }
  out.table = t.str();
  return out;
}

std::vector<std::vector<std::string>> ValidationBatches(size_t requests) {
  static const char* kWords[] = {"hello", "world", "naïve", "café", "\"quoted\"",
                                 "tab\there", "back\\slash", "end."};
  std::vector<std::vector<std::string>> out;
  for (size_t i = 0; i < requests; ++i) {
    std::vector<std::string> batch;
    const size_t size = 1 + i % 3;
    for (size_t k = 0; k < size; ++k) {
      std::string s = "request " + std::to_string(i) + " item " + std::to_string(k);
      s += " ";
      s += kWords[(i + k) % (sizeof(kWords) / sizeof(kWords[0]))];
      batch.push_back(s);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

ValidationResult CmdValidateAdapter(const std::string& manifest_path, size_t requests,
                                    const std::string& transcript_path) {
  ValidationResult result;
  json& d = result.details;
  d["manifest"] = manifest_path;
  d["requests"] = requests;
  std::string transcript;
  try {
    runner::ModelManifest manifest = runner::ModelManifest::Load(manifest_path);
    auto conn = runner::ModelConnection::Open(manifest);
    d["ready"] = {{"name", conn.ready().model_name}, {"params", conn.ready().params}};
    conn.set_transcript(&transcript);
    size_t echoed = 0;
    const auto batches = ValidationBatches(requests);
    for (size_t i = 0; i < batches.size(); ++i) {
      auto rec = conn.Exchange(batches[i], i);
      if (rec.outputs == batches[i]) ++echoed;
    }
    d["echo_matches"] = echoed;
    d["exit_status"] = conn.Finish();
    d["conformant"] = true;
  } catch (const Error& e) {
    d["conformant"] = false;
    d["error_kind"] = e.kind();
    d["error"] = e.what();
    result.exit_code = static_cast<int>(e.error_class());
  }
  if (!transcript_path.empty()) WriteAtomically(transcript_path, transcript);
  return result;
}

}  // namespace effbench::app
