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

#include <sys/types.h>

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protocol/protocol.hpp"

namespace effbench::runner {

using Clock = std::chrono::steady_clock;

struct SpawnOptions {
  std::vector<std::string> argv;
  std::string workdir;                       // empty: inherit
  std::map<std::string, std::string> env;    // merged over the current env
  bool pipe_stdin = true;
  bool pipe_stdout = true;
};

/// Status of a finished child in shell convention: the exit code, or
/// 128 + signal number when it was killed.
int DecodeWaitStatus(int status);

/// \brief A child process in its own process group with piped stdio.
///
/// Destruction kills the whole group if it is still running.
class ChildProcess {
 public:
  /// Throws SpawnFailure if the executable cannot be started.
  static ChildProcess Spawn(const SpawnOptions& opts);

  ChildProcess(ChildProcess&& other) noexcept;
  ChildProcess& operator=(ChildProcess&& other) noexcept;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ~ChildProcess();

  pid_t pid() const { return pid_; }

  /// Next stdout line, or nullopt at EOF. Throws Timeout (kind given by the
  /// caller) when `deadline` passes first.
  std::optional<std::string> ReadLine(Clock::time_point deadline,
                                      const char* timeout_kind);

  /// Writes everything or throws ModelCrashed (broken pipe) / the timeout.
  void WriteAll(std::string_view data, Clock::time_point deadline,
                const char* timeout_kind);

  void CloseStdin();

  /// Non-blocking reap; returns the decoded status once exited.
  std::optional<int> TryWait();

  /// Waits up to `grace_s`, then SIGKILLs the process group and reaps.
  int WaitOrKill(double grace_s);

  bool exited() const { return exit_status_.has_value(); }

 private:
  ChildProcess() = default;
  void Reset() noexcept;

  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::optional<int> exit_status_;
  protocol::LineDecoder decoder_;
  bool eof_ = false;
};

}  // namespace effbench::runner
