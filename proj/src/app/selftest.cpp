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

#include "app/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>
#include <vector>

#include "common/error.hpp"
#include "common/text.hpp"
#include "protocol/protocol.hpp"

namespace effbench::app {

using json = nlohmann::json;

namespace {

int ParseModeArg(const std::string& mode, const std::string& prefix) {
  std::string arg = mode.substr(prefix.size());
  char* end = nullptr;
  long v = std::strtol(arg.c_str(), &end, 10);
  if (arg.empty() || *end != '\0' || v < 0 || v > 1000000)
    ConfigError("bad selftest mode \"" + mode + "\"");
  return static_cast<int>(v);
}

// Timer slack and wake-up latency make a plain sleep overshoot by a few
// hundred microseconds; the last stretch is spun so delay:<ms> means <ms>.
void SleepMs(int ms) {
  if (ms <= 0) return;
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::milliseconds(ms);
  const auto coarse = deadline - std::chrono::milliseconds(2);
  if (Clock::now() < coarse) std::this_thread::sleep_until(coarse);
  while (Clock::now() < deadline) std::this_thread::yield();
}

}  // namespace

SelftestOptions SelftestOptions::FromJson(const std::string& mode, const json& options) {
  SelftestOptions o;
  o.mode = mode;
  if (mode.rfind("delay:", 0) == 0) ParseModeArg(mode, "delay:");
  else if (mode.rfind("alloc:", 0) == 0) ParseModeArg(mode, "alloc:");
  else if (mode != "echo" && mode != "translator-toy" && mode != "upper")
    ConfigError("unknown selftest mode \"" + mode + "\"");
  o.name = "selftest-" + mode;

  if (options.is_null()) return o;
  if (!options.is_object()) ConfigError("selftest options must be an object");
  try {
    for (const auto& [k, v] : options.items()) {
      if (k == "params") o.params = v.get<uint64_t>();
      else if (k == "name") o.name = v.get<std::string>();
      else if (k == "startup_ms") o.startup_ms = v.get<int>();
      else if (k == "chatter") o.chatter = v.get<bool>();
      else if (k == "delay_ms") o.delay_ms = v.get<int>();
      else if (k == "fault") o.fault = v.get<std::string>();
      else if (k == "fault_at") o.fault_at = v.get<uint64_t>();
      else ConfigError("unknown selftest option \"" + k + "\"");
    }
  } catch (const json::exception& e) {
    ConfigError(std::string("bad selftest option: ") + e.what());
  }
  static const char* kFaults[] = {"",      "short-output", "bad-index", "malformed",
                                  "crash", "hang",         "no-ready"};
  if (std::find_if(std::begin(kFaults), std::end(kFaults),
                   [&](const char* f) { return o.fault == f; }) == std::end(kFaults))
    ConfigError("unknown selftest fault \"" + o.fault + "\"");
  if (o.startup_ms < 0 || o.delay_ms < 0) ConfigError("selftest sleeps must be >= 0");
  return o;
}

std::string ReverseWords(const std::string& text) {
  auto words = SplitWhitespace(text);
  std::string out;
  for (auto it = words.rbegin(); it != words.rend(); ++it) {
    if (!out.empty()) out += ' ';
    out.append(*it);
  }
  return out;
}

int RunSelftestModel(const SelftestOptions& o, std::istream& in, std::ostream& out) {
  int delay = o.delay_ms;
  size_t alloc_mib = 0;
  if (o.mode.rfind("delay:", 0) == 0) delay += ParseModeArg(o.mode, "delay:");
  if (o.mode.rfind("alloc:", 0) == 0) alloc_mib = ParseModeArg(o.mode, "alloc:");

  auto transform = [&](const std::string& s) -> std::string {
    if (o.mode == "translator-toy") return ReverseWords(s);
    if (o.mode == "upper") {
      std::string u = s;
      for (char& c : u)
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
      return u;
    }
    return s;
  };

  SleepMs(o.startup_ms);
  if (o.chatter) out << "selftest: loading " << o.name << std::endl;
  if (o.fault != "no-ready")
    out << protocol::EncodeReady({o.params, o.name}) << std::flush;

  std::unique_ptr<char[]> ballast;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (o.fault == "no-ready") continue;
    protocol::RequestLine req;
    try {
      req = protocol::DecodeRequest(line);
    } catch (const Error& e) {
      std::cerr << "selftest: " << e.what() << std::endl;
      return 3;
    }

    if (alloc_mib > 0 && !ballast) {
      const size_t bytes = alloc_mib * 1024 * 1024;
      ballast.reset(new char[bytes]);
      std::memset(ballast.get(), 0x5a, bytes);
    }

    std::vector<std::string> inputs = req.batch;
    if (req.offline_path) {
      std::ifstream f(*req.offline_path);
      if (!f) {
        std::cerr << "selftest: cannot open " << *req.offline_path << std::endl;
        return 1;
      }
      std::string l;
      while (std::getline(f, l)) inputs.push_back(UnescapeLine(l));
    }

    std::vector<std::string> outputs;
    outputs.reserve(inputs.size());
    for (const auto& s : inputs) outputs.push_back(transform(s));
    SleepMs(delay);

    uint64_t index = req.batch_index;
    if (req.batch_index == o.fault_at && !o.fault.empty()) {
      if (o.fault == "short-output" && !outputs.empty()) outputs.pop_back();
      if (o.fault == "bad-index") index += 1;
      if (o.fault == "malformed") {
        out << "{\"outputs\": [\"unterminated\n" << std::flush;
        continue;
      }
      if (o.fault == "crash") {
        std::cerr << "selftest: injected crash" << std::endl;
        std::_Exit(70);
      }
      if (o.fault == "hang") {
        for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
      }
    }
    out << protocol::EncodeResponse(outputs, index) << std::flush;
  }
  return 0;
}

}  // namespace effbench::app
