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

// Host-wide single-flight slot: at most one benchmark run at a time, across
// threads and processes.
//
// Three files share the lock path prefix:
//   <lock>         holder record {token, job_id, pid, host, heartbeat_ms,
//                  heartbeat_s}; created with link(2), so creation is atomic
//   <lock>.queue   FIFO of waiting tokens, one per line
//   <lock>.guard   flock(2) target; every read-modify-write of the other two
//                  happens under it, and the kernel drops it if a process
//                  dies
// A holder is stale when its heartbeat is older than 3 heartbeat periods and
// its owner is gone (dead pid on this host, or any owner on another host).
// Stale holders are removed under the guard and the queue head proceeds.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace effbench::scheduler {

struct SchedulerOptions {
  std::string lock_path;  // empty: $EFFBENCH_LOCK_PATH, else /tmp/effbench.lock
  double heartbeat_s = 2.0;
  std::optional<double> queue_timeout_s;
  double poll_s = 0.02;
  /// When set, "acquire"/"release"/"reclaim" events are appended here with a
  /// CLOCK_MONOTONIC nanosecond timestamp.
  std::string transcript_path;
};

std::string DefaultLockPath();

enum class TicketState { kQueued, kRunning, kDone, kFailed };

const char* ToString(TicketState state);

/// \brief Proof of holding the slot. Move-only; a running ticket keeps a
/// heartbeat thread alive and releases the slot when destroyed.
class JobTicket {
 public:
  JobTicket(JobTicket&&) noexcept;
  JobTicket& operator=(JobTicket&&) noexcept;
  JobTicket(const JobTicket&) = delete;
  JobTicket& operator=(const JobTicket&) = delete;
  ~JobTicket();

  const std::string& job_id() const;
  const std::string& token() const;
  std::chrono::system_clock::time_point enqueued_at() const;
  TicketState state() const;

 private:
  friend JobTicket Acquire(const std::string&, const SchedulerOptions&);
  friend void Release(JobTicket&, bool);
  struct Impl;
  explicit JobTicket(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Blocks until the caller holds the slot; waiters are granted in enqueue
/// order. Throws QueueTimeout when options.queue_timeout_s elapses first.
JobTicket Acquire(const std::string& job_id, const SchedulerOptions& options = {});

/// Frees the slot for the next waiter. Throws NotHolder if the ticket does
/// not hold it (already released, or never granted).
void Release(JobTicket& ticket, bool failed = false);

/// Number of waiters currently queued at `lock_path`.
size_t QueueLength(const std::string& lock_path);

}  // namespace effbench::scheduler
