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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <thread>

namespace effbench::metering {

inline constexpr double kBytesPerGiB = 1024.0 * 1024.0 * 1024.0;

/// Resident set size summed over `root` and all of its descendants, read
/// from /proc. Returns nullopt when `root` no longer exists or is a zombie.
std::optional<uint64_t> ProcessTreeRss(pid_t root);

/// \brief Periodically samples the RSS of a process tree and keeps the
/// maximum.
class MemorySampler {
 public:
  MemorySampler(pid_t root, int period_ms = 50);
  ~MemorySampler();

  MemorySampler(const MemorySampler&) = delete;
  MemorySampler& operator=(const MemorySampler&) = delete;

  /// Takes the first sample synchronously; throws ProcessVanished if the
  /// process is already gone. Then samples on a background thread.
  void Start();

  /// Takes a last sample and returns the peak seen, in bytes. A process that
  /// vanished mid-run keeps the maximum observed before it went away.
  uint64_t Stop();

  uint64_t peak_bytes() const { return peak_.load(); }
  bool vanished() const { return vanished_.load(); }

 private:
  void SampleOnce();
  void Loop();

  pid_t root_;
  int period_ms_;
  std::atomic<uint64_t> peak_{0};
  std::atomic<bool> vanished_{false};
  std::atomic<bool> stop_{false};
  std::mutex mu_;
  std::condition_variable wake_;
  std::thread thread_;
};

}  // namespace effbench::metering
