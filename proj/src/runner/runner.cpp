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

#include "runner/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "common/log.hpp"

namespace effbench::runner {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

Clock::time_point After(double seconds) {
  return Clock::now() + std::chrono::duration_cast<Clock::duration>(
                            std::chrono::duration<double>(seconds));
}

std::vector<std::string> ReadArgv(const json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key) || j[key].is_null()) return out;
  if (!j[key].is_array()) ConfigError(std::string("manifest \"") + key + "\" must be an array");
  for (const auto& a : j[key]) {
    if (!a.is_string())
      ConfigError(std::string("manifest \"") + key + "\" must hold strings");
    out.push_back(a.get<std::string>());
  }
  return out;
}

double PositiveSeconds(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  if (!j[key].is_number() || !(j[key].get<double>() > 0.0))
    ConfigError(std::string("manifest \"") + key + "\" must be a positive number");
  return j[key].get<double>();
}

}  // namespace

ModelManifest ModelManifest::FromJson(const json& j, const std::string& base_dir) {
  if (!j.is_object()) ConfigError("manifest must be a JSON object");
  ModelManifest m;
  m.name = j.value("name", std::string());
  m.start_command = ReadArgv(j, "start_command");
  if (m.start_command.empty()) ConfigError("manifest \"start_command\" must be non-empty");
  m.setup_command = ReadArgv(j, "setup_command");
  m.workdir = j.value("workdir", std::string());
  if (m.workdir.empty()) m.workdir = base_dir;
  else if (!base_dir.empty() && fs::path(m.workdir).is_relative())
    m.workdir = (fs::path(base_dir) / m.workdir).lexically_normal().string();
  if (j.contains("env") && !j["env"].is_null()) {
    if (!j["env"].is_object()) ConfigError("manifest \"env\" must be an object");
    for (const auto& [k, v] : j["env"].items()) {
      if (!v.is_string()) ConfigError("manifest env values must be strings");
      m.env[k] = v.get<std::string>();
    }
  }
  if (j.contains("params_override") && !j["params_override"].is_null()) {
    const auto& p = j["params_override"];
    if (!p.is_number_integer() || (!p.is_number_unsigned() && p.get<int64_t>() < 0))
      ConfigError("manifest \"params_override\" must be a non-negative integer");
    m.params_override = p.get<uint64_t>();
  }
  m.startup_timeout_s = PositiveSeconds(j, "startup_timeout_s", m.startup_timeout_s);
  m.response_timeout_s = PositiveSeconds(j, "response_timeout_s", m.response_timeout_s);
  m.exit_grace_s = PositiveSeconds(j, "exit_grace_s", m.exit_grace_s);
  return m;
}

ModelManifest ModelManifest::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) ConfigError("cannot open manifest " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) ConfigError("manifest " + path + " is not valid JSON");
  std::string base = fs::absolute(fs::path(path)).parent_path().string();
  return FromJson(j, base);
}

json ModelManifest::ToJson() const {
  json j;
  j["name"] = name;
  j["start_command"] = start_command;
  j["setup_command"] = setup_command;
  j["workdir"] = workdir;
  j["env"] = env;
  j["params_override"] = params_override ? json(*params_override) : json();
  j["startup_timeout_s"] = startup_timeout_s;
  j["response_timeout_s"] = response_timeout_s;
  j["exit_grace_s"] = exit_grace_s;
  return j;
}

void RunSetupCommand(const ModelManifest& manifest) {
  if (manifest.setup_command.empty()) return;
  SpawnOptions opts;
  opts.argv = manifest.setup_command;
  opts.workdir = manifest.workdir;
  opts.env = manifest.env;
  opts.pipe_stdin = false;
  opts.pipe_stdout = false;
  log::Info("running setup command for ", manifest.name);
  ChildProcess proc = ChildProcess::Spawn(opts);
  // Setup (e.g. checkpoint download) has no deadline of its own.
  int status = proc.WaitOrKill(1e9);
  if (status != 0)
    Fail(ErrorClass::kConfig, "SetupFailed",
         "setup command exited with status " + std::to_string(status));
}

size_t RunRecord::TotalInstances() const {
  size_t n = 0;
  for (const auto& b : batches) n += b.size;
  return n;
}

ModelConnection ModelConnection::Open(const ModelManifest& manifest) {
  SpawnOptions opts;
  opts.argv = manifest.start_command;
  opts.workdir = manifest.workdir;
  opts.env = manifest.env;
  ModelConnection conn(manifest, ChildProcess::Spawn(opts));

  const auto deadline = After(manifest.startup_timeout_s);
  for (;;) {
    auto line = conn.process_.ReadLine(deadline, "ReadyTimeout");
    if (!line) conn.RaiseEof();
    if (auto ready = protocol::ParseReady(*line)) {
      conn.ready_ = *ready;
      conn.ready_at_ = Clock::now();
      break;
    }
    log::Info("[", manifest.name.empty() ? "model" : manifest.name, "] ",
              Excerpt(*line));
  }
  log::Debug("model ready: name=", conn.ready_.model_name,
             " params=", conn.ready_.params);
  return conn;
}

uint64_t ModelConnection::params() const {
  return manifest_.params_override.value_or(ready_.params);
}

void ModelConnection::RaiseEof() {
  std::optional<int> status = process_.TryWait();
  if (!status) {
    // Give a dying process a moment so the diagnostic can carry its status.
    auto until = After(1.0);
    while (!status && Clock::now() < until) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      status = process_.TryWait();
    }
  }
  Fail(ErrorClass::kModelCrash, "ModelCrashed",
       "model closed its stdout" +
           (status ? " (exit status " + std::to_string(*status) + ")"
                   : std::string(" (still running)")));
}

std::string ModelConnection::ReadResponseLine() {
  auto line = process_.ReadLine(After(manifest_.response_timeout_s), "ResponseTimeout");
  if (!line) RaiseEof();
  if (transcript_) transcript_->append(*line).push_back('\n');
  return std::move(*line);
}

BatchRecord ModelConnection::Exchange(const std::vector<std::string>& batch,
                                      uint64_t index) {
  BatchRecord rec;
  rec.size = batch.size();
  rec.dispatch_ts = Clock::now();
  std::string request = protocol::EncodeRequest(batch, index);
  if (transcript_) transcript_->append(request);
  process_.WriteAll(request, After(manifest_.response_timeout_s), "ResponseTimeout");
  next_index_ = index + 1;
  std::string line = ReadResponseLine();
  rec.response_ts = Clock::now();
  rec.outputs = protocol::DecodeResponse(line, batch.size(), index).outputs;
  return rec;
}

BatchRecord ModelConnection::ExchangeOffline(const std::string& path,
                                             size_t expected_len, uint64_t index) {
  BatchRecord rec;
  rec.size = expected_len;
  rec.dispatch_ts = Clock::now();
  std::string request = protocol::EncodeOfflineRequest(path, index);
  if (transcript_) transcript_->append(request);
  process_.WriteAll(request, After(manifest_.response_timeout_s), "ResponseTimeout");
  next_index_ = index + 1;
  std::string line = ReadResponseLine();
  rec.response_ts = Clock::now();
  rec.outputs = protocol::DecodeResponse(line, expected_len, index).outputs;
  return rec;
}

int ModelConnection::Finish() {
  process_.CloseStdin();
  int status = process_.WaitOrKill(manifest_.exit_grace_s);
  if (status != 0) log::Warn("model exited with status ", status);
  return status;
}

namespace {

template <typename Body>
RunOutcome Drive(ModelConnection& conn, const RunOptions& options, Body&& body) {
  RunOutcome out;
  out.record.ready_at = conn.ready_at();
  out.record.measure_start = out.record.ready_at;
  out.record.run_end = out.record.ready_at;
  bool measuring = false;
  auto start_measuring = [&] {
    out.record.measure_start = Clock::now();
    measuring = true;
    if (options.hooks.on_measure_start) options.hooks.on_measure_start(out.record);
  };
  try {
    body(out.record, start_measuring);
    out.record.run_end =
        out.record.batches.empty() ? Clock::now() : out.record.batches.back().response_ts;
  } catch (const Error& e) {
    out.error = e;
    out.record.run_end = Clock::now();
  }
  if (measuring && options.hooks.on_measure_end) {
    try {
      options.hooks.on_measure_end(out.record);
    } catch (const Error& e) {
      if (!out.error) out.error = e;
    }
  }
  return out;
}

}  // namespace

RunOutcome RunOnline(ModelConnection& conn, const BatchPlan& plan,
                     const RunOptions& options) {
  if (!IsOnline(plan.scenario.kind))
    ConfigError("RunOnline needs an online scenario plan");
  return Drive(conn, options, [&](RunRecord& record, auto&& start_measuring) {
    uint64_t index = conn.next_index();
    const int warmup = std::max(0, options.warmup_batches);
    for (int w = 0; w < warmup && !plan.batches.empty(); ++w) {
      const auto& b = plan.batches[static_cast<size_t>(w) % plan.batches.size()];
      std::vector<std::string> inputs;
      for (const auto& inst : b) inputs.push_back(inst.input);
      conn.Exchange(inputs, index++);
    }
    start_measuring();
    for (const auto& b : plan.batches) {
      std::vector<std::string> inputs;
      inputs.reserve(b.size());
      for (const auto& inst : b) inputs.push_back(inst.input);
      record.batches.push_back(conn.Exchange(inputs, index++));
    }
  });
}

RunOutcome RunOffline(ModelConnection& conn, const OfflineJob& job,
                      const std::string& instance_file, const RunOptions& options) {
  return Drive(conn, options, [&](RunRecord& record, auto&& start_measuring) {
    start_measuring();
    record.batches.push_back(
        conn.ExchangeOffline(instance_file, job.plan.total_instances, conn.next_index()));
  });
}

}  // namespace effbench::runner
