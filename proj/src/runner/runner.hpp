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

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/error.hpp"
#include "protocol/protocol.hpp"
#include "runner/process.hpp"
#include "scenario/scenario.hpp"

namespace effbench::runner {

/// How to start (and optionally prepare) a model under test.
struct ModelManifest {
  std::string name;
  std::vector<std::string> start_command;
  std::vector<std::string> setup_command;  // empty: none
  std::string workdir;
  std::map<std::string, std::string> env;
  std::optional<uint64_t> params_override;
  double startup_timeout_s = 300.0;
  double response_timeout_s = 600.0;
  double exit_grace_s = 10.0;

  /// Relative workdir resolves against `base_dir` (the manifest's folder).
  static ModelManifest FromJson(const nlohmann::json& j,
                                const std::string& base_dir = "");
  static ModelManifest Load(const std::string& path);
  nlohmann::json ToJson() const;
};

/// Runs the setup command to completion. Throws SetupFailed on nonzero exit.
void RunSetupCommand(const ModelManifest& manifest);

struct BatchRecord {
  Clock::time_point dispatch_ts;
  Clock::time_point response_ts;
  size_t size = 0;
  std::vector<std::string> outputs;

  double LatencySeconds() const {
    return std::chrono::duration<double>(response_ts - dispatch_ts).count();
  }
};

struct RunRecord {
  Clock::time_point ready_at;
  /// Equals ready_at unless warm-up batches ran.
  Clock::time_point measure_start;
  std::vector<BatchRecord> batches;
  Clock::time_point run_end;
  uint64_t peak_rss_bytes = 0;
  int exit_status = 0;

  size_t TotalInstances() const;
};

/// A spawned model that has completed the ready handshake.
class ModelConnection {
 public:
  /// Spawns the start command and waits for the ready line. Lines printed
  /// before it are logged as chatter. Throws SpawnFailure, ReadyTimeout,
  /// ModelCrashed (EOF before ready) or ProtocolError.
  static ModelConnection Open(const ModelManifest& manifest);

  const protocol::ReadySignal& ready() const { return ready_; }
  /// Reported parameter count: the manifest override wins.
  uint64_t params() const;
  Clock::time_point ready_at() const { return ready_at_; }
  pid_t pid() const { return process_.pid(); }
  const ModelManifest& manifest() const { return manifest_; }

  /// One closed-loop round trip. dispatch/response timestamps bracket the
  /// request serialization, the write and the read of the full response line.
  BatchRecord Exchange(const std::vector<std::string>& batch, uint64_t index);
  BatchRecord ExchangeOffline(const std::string& path, size_t expected_len,
                              uint64_t index);

  /// Closes stdin and waits out the grace period, then kills.
  int Finish();

  uint64_t next_index() const { return next_index_; }

  /// Raw lines written to / read from the model since the handshake, for
  /// conformance transcripts.
  void set_transcript(std::string* sink) { transcript_ = sink; }

 private:
  ModelConnection(ModelManifest manifest, ChildProcess process)
      : manifest_(std::move(manifest)), process_(std::move(process)) {}

  std::string ReadResponseLine();
  [[noreturn]] void RaiseEof();

  ModelManifest manifest_;
  ChildProcess process_;
  protocol::ReadySignal ready_;
  Clock::time_point ready_at_;
  uint64_t next_index_ = 0;
  std::string* transcript_ = nullptr;
};

/// Called once measurement starts (after warm-up) and once it ends.
struct RunHooks {
  std::function<void(const RunRecord&)> on_measure_start;
  std::function<void(const RunRecord&)> on_measure_end;
};

struct RunOptions {
  int warmup_batches = 0;
  RunHooks hooks;
};

/// The record always holds every batch completed before a failure.
struct RunOutcome {
  RunRecord record;
  std::optional<Error> error;

  bool ok() const { return !error.has_value(); }
};

/// Dispatches the plan's batches strictly one at a time.
RunOutcome RunOnline(ModelConnection& conn, const BatchPlan& plan,
                     const RunOptions& options = {});

/// Sends a single request naming `instance_file` and expects every output
/// back in file line order.
RunOutcome RunOffline(ModelConnection& conn, const OfflineJob& job,
                      const std::string& instance_file,
                      const RunOptions& options = {});

}  // namespace effbench::runner
