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

// Built-in model under test, speaking the stdio protocol. Modes:
//   echo             outputs = inputs
//   delay:<ms>       echo, after sleeping <ms> per request
//   alloc:<MiB>      echo; allocates and touches <MiB> on the first request
//   translator-toy   reverses the word order of every input
//   upper            ASCII upper-case
// Options (JSON object): params, name, startup_ms, chatter, delay_ms (extra
// per-request sleep in any mode), fault, fault_at (request index, default 0).
// Faults: short-output, bad-index, malformed, crash, hang, no-ready.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace effbench::app {

struct SelftestOptions {
  std::string mode;
  uint64_t params = 1000000;
  std::string name;
  int startup_ms = 0;
  bool chatter = false;
  int delay_ms = 0;
  std::string fault;
  uint64_t fault_at = 0;

  /// Throws ConfigError on an unknown mode, fault or option.
  static SelftestOptions FromJson(const std::string& mode, const nlohmann::json& options);
};

/// The word-order reversal applied by translator-toy.
std::string ReverseWords(const std::string& text);

/// Serves requests from `in` until EOF. Returns the process exit code.
int RunSelftestModel(const SelftestOptions& options, std::istream& in, std::ostream& out);

}  // namespace effbench::app
