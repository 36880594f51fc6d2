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

#include "metering/memory.hpp"

#include <dirent.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "common/error.hpp"

namespace effbench::metering {
namespace {

struct ProcStat {
  char state = '?';
  pid_t ppid = 0;
};

std::optional<ProcStat> ReadStat(pid_t pid) {
  std::ifstream in("/proc/" + std::to_string(pid) + "/stat");
  std::string content;
  if (!std::getline(in, content)) return std::nullopt;
  // Format: pid (comm) state ppid ...; comm may hold spaces and parens.
  size_t close = content.rfind(')');
  if (close == std::string::npos || close + 4 > content.size()) return std::nullopt;
  ProcStat st;
  st.state = content[close + 2];
  st.ppid = static_cast<pid_t>(std::strtol(content.c_str() + close + 4, nullptr, 10));
  return st;
}

uint64_t ReadRss(pid_t pid) {
  std::ifstream in("/proc/" + std::to_string(pid) + "/statm");
  uint64_t size = 0;
  uint64_t resident = 0;
  if (!(in >> size >> resident)) return 0;
  static const uint64_t page = static_cast<uint64_t>(sysconf(_SC_PAGESIZE));
  return resident * page;
}

}  // namespace

std::optional<uint64_t> ProcessTreeRss(pid_t root) {
  auto root_stat = ReadStat(root);
  if (!root_stat || root_stat->state == 'Z' || root_stat->state == 'X')
    return std::nullopt;

  std::unordered_map<pid_t, std::vector<pid_t>> children;
  if (DIR* dir = opendir("/proc")) {
    while (dirent* ent = readdir(dir)) {
      char* end = nullptr;
      long pid = std::strtol(ent->d_name, &end, 10);
      if (end == ent->d_name || *end != '\0') continue;
      if (auto st = ReadStat(static_cast<pid_t>(pid)))
        children[st->ppid].push_back(static_cast<pid_t>(pid));
    }
    closedir(dir);
  }

  uint64_t total = 0;
  std::vector<pid_t> stack{root};
  while (!stack.empty()) {
    pid_t p = stack.back();
    stack.pop_back();
    total += ReadRss(p);
    if (auto it = children.find(p); it != children.end())
      stack.insert(stack.end(), it->second.begin(), it->second.end());
  }
  return total;
}

MemorySampler::MemorySampler(pid_t root, int period_ms)
    : root_(root), period_ms_(period_ms > 0 ? period_ms : 50) {}

MemorySampler::~MemorySampler() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void MemorySampler::SampleOnce() {
  if (vanished_) return;
  auto rss = ProcessTreeRss(root_);
  if (!rss) {
    vanished_ = true;
    return;
  }
  uint64_t prev = peak_.load();
  while (*rss > prev && !peak_.compare_exchange_weak(prev, *rss)) {
  }
}

void MemorySampler::Start() {
  SampleOnce();
  if (vanished_)
    Fail(ErrorClass::kModelCrash, "ProcessVanished",
         "process " + std::to_string(root_) + " is not running");
  stop_ = false;
  thread_ = std::thread([this] { Loop(); });
}

void MemorySampler::Loop() {
  std::unique_lock<std::mutex> lock(mu_);
  while (!stop_) {
    if (wake_.wait_for(lock, std::chrono::milliseconds(period_ms_),
                       [this] { return stop_.load(); }))
      break;
    lock.unlock();
    SampleOnce();
    lock.lock();
  }
}

uint64_t MemorySampler::Stop() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable()) thread_.join();
  SampleOnce();
  return peak_.load();
}

}  // namespace effbench::metering
