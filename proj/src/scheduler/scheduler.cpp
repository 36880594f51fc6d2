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

#include "scheduler/scheduler.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "common/error.hpp"
#include "common/log.hpp"

namespace effbench::scheduler {

using json = nlohmann::json;

namespace {

int64_t NowUnixMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

int64_t MonotonicNs() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string HostName() {
  char buf[256] = {0};
  if (::gethostname(buf, sizeof(buf) - 1) != 0) return "localhost";
  return buf;
}

bool PidAlive(pid_t pid) {
  if (pid <= 0) return false;
  if (::kill(pid, 0) != 0 && errno == ESRCH) return false;
  // An unreaped zombie still answers kill(0) but will never heartbeat again.
  std::ifstream in("/proc/" + std::to_string(pid) + "/stat");
  std::string stat;
  if (std::getline(in, stat)) {
    size_t close = stat.rfind(')');
    if (close != std::string::npos && close + 2 < stat.size()) {
      char state = stat[close + 2];
      if (state == 'Z' || state == 'X') return false;
    }
  }
  return true;
}

[[noreturn]] void SysFail(const std::string& what) {
  Fail(ErrorClass::kOther, "SchedulerIo", what + ": " + std::strerror(errno));
}

// Exclusive flock on <lock>.guard for the lifetime of the object.
class GuardLock {
 public:
  explicit GuardLock(const std::string& lock_path) {
    std::string path = lock_path + ".guard";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0666);
    if (fd_ < 0) SysFail("open " + path);
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        SysFail("flock " + path);
      }
    }
  }
  ~GuardLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  GuardLock(const GuardLock&) = delete;
  GuardLock& operator=(const GuardLock&) = delete;

 private:
  int fd_ = -1;
};

struct QueueEntry {
  std::string token;
  pid_t pid = 0;
  std::string host;
  int64_t enqueued_ms = 0;
};

std::vector<QueueEntry> ReadQueue(const std::string& lock_path) {
  std::vector<QueueEntry> out;
  std::ifstream in(lock_path + ".queue");
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    QueueEntry e;
    if (ls >> e.token >> e.pid >> e.host >> e.enqueued_ms) out.push_back(e);
  }
  return out;
}

void WriteFileAtomically(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp." + std::to_string(::getpid()) + "." +
                    std::to_string(MonotonicNs());
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) SysFail("write " + tmp);
    out << content;
    if (!out.flush()) SysFail("write " + tmp);
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    SysFail("rename " + tmp);
  }
}

void WriteQueue(const std::string& lock_path, const std::vector<QueueEntry>& q) {
  std::ostringstream os;
  for (const auto& e : q)
    os << e.token << ' ' << e.pid << ' ' << e.host << ' ' << e.enqueued_ms << '\n';
  WriteFileAtomically(lock_path + ".queue", os.str());
}

struct Holder {
  std::string token;
  std::string job_id;
  pid_t pid = 0;
  std::string host;
  int64_t heartbeat_ms = 0;
  double heartbeat_s = 2.0;
  bool corrupt = false;
};

std::optional<Holder> ReadHolder(const std::string& lock_path) {
  std::ifstream in(lock_path);
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  Holder h;
  if (j.is_discarded() || !j.is_object() || !j.contains("token")) {
    h.corrupt = true;
    return h;
  }
  h.token = j.value("token", std::string());
  h.job_id = j.value("job_id", std::string());
  h.pid = j.value("pid", 0);
  h.host = j.value("host", std::string());
  h.heartbeat_ms = j.value("heartbeat_ms", int64_t{0});
  h.heartbeat_s = j.value("heartbeat_s", 2.0);
  return h;
}

std::string HolderJson(const std::string& token, const std::string& job_id,
                       double heartbeat_s) {
  json j;
  j["token"] = token;
  j["job_id"] = job_id;
  j["pid"] = ::getpid();
  j["host"] = HostName();
  j["heartbeat_ms"] = NowUnixMs();
  j["heartbeat_s"] = heartbeat_s;
  return j.dump() + "\n";
}

// Creates the holder file only if none exists.
bool CreateHolder(const std::string& lock_path, const std::string& content) {
  std::string tmp = lock_path + ".new." + std::to_string(::getpid()) + "." +
                    std::to_string(MonotonicNs());
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) SysFail("write " + tmp);
    out << content;
    if (!out.flush()) SysFail("write " + tmp);
  }
  int rc = ::link(tmp.c_str(), lock_path.c_str());
  int err = errno;
  ::unlink(tmp.c_str());
  if (rc == 0) return true;
  if (err == EEXIST) return false;
  errno = err;
  SysFail("link " + lock_path);
}

void AppendTranscript(const std::string& path, const char* event,
                      const std::string& job_id) {
  if (path.empty()) return;
  std::string line = std::to_string(MonotonicNs()) + " " + event + " " + job_id +
                     " " + std::to_string(::getpid()) + "\n";
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0666);
  if (fd < 0) return;
  ssize_t ignored = ::write(fd, line.data(), line.size());
  (void)ignored;
  ::close(fd);
}

std::string NewToken() {
  static std::atomic<uint64_t> counter{0};
  std::random_device rd;
  std::ostringstream os;
  os << HostName() << ':' << ::getpid() << ':' << counter.fetch_add(1) << ':'
     << std::hex << rd();
  return os.str();
}

bool IsStale(const Holder& h, const std::string& host) {
  if (h.corrupt) return true;
  const double age_s = static_cast<double>(NowUnixMs() - h.heartbeat_ms) / 1000.0;
  if (age_s <= 3.0 * h.heartbeat_s) return false;
  return h.host != host || !PidAlive(h.pid);
}

}  // namespace

std::string DefaultLockPath() {
  if (const char* env = std::getenv("EFFBENCH_LOCK_PATH"); env && *env) return env;
  return "/tmp/effbench.lock";
}

const char* ToString(TicketState state) {
  switch (state) {
    case TicketState::kQueued: return "queued";
    case TicketState::kRunning: return "running";
    case TicketState::kDone: return "done";
    case TicketState::kFailed: return "failed";
  }
  return "unknown";
}

struct JobTicket::Impl {
  std::string job_id;
  std::string token;
  std::chrono::system_clock::time_point enqueued_at;
  std::atomic<TicketState> state{TicketState::kQueued};
  SchedulerOptions options;

  std::mutex mu;
  std::condition_variable wake;
  bool stop = false;
  std::thread heartbeat;

  void StartHeartbeat() {
    stop = false;
    heartbeat = std::thread([this] {
      std::unique_lock<std::mutex> lock(mu);
      const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(options.heartbeat_s));
      while (!wake.wait_for(lock, period, [this] { return stop; })) {
        lock.unlock();
        try {
          GuardLock guard(options.lock_path);
          auto h = ReadHolder(options.lock_path);
          if (h && h->token == token)
            WriteFileAtomically(options.lock_path,
                                HolderJson(token, job_id, options.heartbeat_s));
        } catch (const std::exception& e) {
          log::Warn("scheduler heartbeat failed: ", e.what());
        }
        lock.lock();
      }
    });
  }

  void StopHeartbeat() {
    {
      std::lock_guard<std::mutex> lock(mu);
      stop = true;
    }
    wake.notify_all();
    if (heartbeat.joinable()) heartbeat.join();
  }
};

JobTicket::JobTicket(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
JobTicket::JobTicket(JobTicket&&) noexcept = default;
JobTicket& JobTicket::operator=(JobTicket&& other) noexcept {
  if (this != &other) {
    if (impl_ && impl_->state == TicketState::kRunning) {
      try {
        Release(*this);
      } catch (...) {
      }
    }
    impl_ = std::move(other.impl_);
  }
  return *this;
}

JobTicket::~JobTicket() {
  if (impl_ && impl_->state == TicketState::kRunning) {
    try {
      Release(*this);
    } catch (const std::exception& e) {
      log::Warn("releasing slot on destruction failed: ", e.what());
    }
  }
}

const std::string& JobTicket::job_id() const { return impl_->job_id; }
const std::string& JobTicket::token() const { return impl_->token; }
std::chrono::system_clock::time_point JobTicket::enqueued_at() const {
  return impl_->enqueued_at;
}
TicketState JobTicket::state() const { return impl_->state.load(); }

JobTicket Acquire(const std::string& job_id, const SchedulerOptions& options) {
  auto impl = std::make_unique<JobTicket::Impl>();
  impl->job_id = job_id.empty() ? std::string("job") : job_id;
  impl->token = NewToken();
  impl->enqueued_at = std::chrono::system_clock::now();
  impl->options = options;
  if (impl->options.lock_path.empty()) impl->options.lock_path = DefaultLockPath();
  if (!(impl->options.heartbeat_s > 0.0)) ConfigError("heartbeat period must be > 0");
  const std::string& lock = impl->options.lock_path;
  const std::string host = HostName();

  {
    GuardLock guard(lock);
    auto q = ReadQueue(lock);
    q.push_back({impl->token, ::getpid(), host, NowUnixMs()});
    WriteQueue(lock, q);
  }

  const auto started = std::chrono::steady_clock::now();
  const auto poll = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(std::max(options.poll_s, 0.001)));
  for (;;) {
    {
      GuardLock guard(lock);
      auto q = ReadQueue(lock);
      size_t before = q.size();
      std::erase_if(q, [&](const QueueEntry& e) {
        return e.token != impl->token && e.host == host && !PidAlive(e.pid);
      });
      bool dirty = q.size() != before;

      auto holder = ReadHolder(lock);
      if (holder && IsStale(*holder, host)) {
        log::Warn(holder->corrupt ? "LockCorrupt: unreadable lock file"
                                  : "reclaiming stale lock held by pid " +
                                        std::to_string(holder->pid) + " (job " +
                                        holder->job_id + ")");
        AppendTranscript(impl->options.transcript_path, "reclaim", holder->job_id);
        ::unlink(lock.c_str());
        holder.reset();
      }

      if (!holder && !q.empty() && q.front().token == impl->token &&
          CreateHolder(lock, HolderJson(impl->token, impl->job_id,
                                        impl->options.heartbeat_s))) {
        q.erase(q.begin());
        WriteQueue(lock, q);
        impl->state = TicketState::kRunning;
        AppendTranscript(impl->options.transcript_path, "acquire", impl->job_id);
        impl->StartHeartbeat();
        return JobTicket(std::move(impl));
      }

      if (options.queue_timeout_s &&
          std::chrono::steady_clock::now() - started >
              std::chrono::duration<double>(*options.queue_timeout_s)) {
        std::erase_if(q, [&](const QueueEntry& e) { return e.token == impl->token; });
        WriteQueue(lock, q);
        impl->state = TicketState::kFailed;
        Fail(ErrorClass::kOther, "QueueTimeout",
             "slot not granted within " + std::to_string(*options.queue_timeout_s) + " s");
      }
      if (dirty) WriteQueue(lock, q);
    }
    std::this_thread::sleep_for(poll);
  }
}

void Release(JobTicket& ticket, bool failed) {
  auto* impl = ticket.impl_.get();
  if (impl == nullptr || impl->state != TicketState::kRunning)
    Fail(ErrorClass::kOther, "NotHolder", "ticket does not hold the slot");
  impl->StopHeartbeat();
  GuardLock guard(impl->options.lock_path);
  auto holder = ReadHolder(impl->options.lock_path);
  if (!holder || holder->token != impl->token) {
    impl->state = TicketState::kFailed;
    Fail(ErrorClass::kOther, "NotHolder",
         "lock file no longer belongs to job " + impl->job_id);
  }
  AppendTranscript(impl->options.transcript_path, "release", impl->job_id);
  ::unlink(impl->options.lock_path.c_str());
  impl->state = failed ? TicketState::kFailed : TicketState::kDone;
}

size_t QueueLength(const std::string& lock_path) {
  GuardLock guard(lock_path);
  return ReadQueue(lock_path).size();
}

}  // namespace effbench::scheduler
