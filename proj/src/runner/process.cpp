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

#include "runner/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <thread>
#include <utility>

#include "common/error.hpp"

extern char** environ;

namespace effbench::runner {
namespace {

void CloseFd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

ErrorClass TimeoutClass(const char* kind) {
  return std::strcmp(kind, "ReadyTimeout") == 0 ? ErrorClass::kProtocol
                                                : ErrorClass::kModelCrash;
}

int RemainingMs(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - Clock::now());
  if (left.count() <= 0) return 0;
  return static_cast<int>(std::min<long long>(left.count() + 1, 1000));
}

bool IsExecutable(const std::string& path) {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
         ::access(path.c_str(), X_OK) == 0;
}

// Path lookup happens before fork so the child only makes
// async-signal-safe calls.
std::string ResolveExecutable(const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  const char* path_env = std::getenv("PATH");
  std::string path = path_env ? path_env : "/usr/bin:/bin";
  size_t start = 0;
  while (start <= path.size()) {
    size_t end = path.find(':', start);
    if (end == std::string::npos) end = path.size();
    std::string dir = path.substr(start, end - start);
    if (dir.empty()) dir = ".";
    std::string candidate = dir + "/" + name;
    if (IsExecutable(candidate)) return candidate;
    start = end + 1;
  }
  return name;
}

}  // namespace

int DecodeWaitStatus(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

ChildProcess ChildProcess::Spawn(const SpawnOptions& opts) {
  if (opts.argv.empty())
    Fail(ErrorClass::kModelCrash, "SpawnFailure", "empty command");

  // A dead model must surface as EPIPE, not kill the harness.
  ::signal(SIGPIPE, SIG_IGN);

  const std::string exe = ResolveExecutable(opts.argv[0]);
  std::vector<std::string> env_strings;
  {
    std::map<std::string, std::string> merged;
    for (char** e = environ; e && *e; ++e) {
      std::string kv(*e);
      size_t eq = kv.find('=');
      if (eq != std::string::npos) merged[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : opts.env) merged[k] = v;
    for (const auto& [k, v] : merged) env_strings.push_back(k + "=" + v);
  }
  std::vector<char*> argv;
  for (const auto& a : opts.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  std::vector<char*> envp;
  for (const auto& e : env_strings) envp.push_back(const_cast<char*>(e.c_str()));
  envp.push_back(nullptr);

  int in_pipe[2] = {-1, -1};
  int out_pipe[2] = {-1, -1};
  int err_pipe[2] = {-1, -1};
  auto cleanup = [&] {
    for (int* p : {in_pipe, out_pipe, err_pipe}) {
      CloseFd(p[0]);
      CloseFd(p[1]);
    }
  };
  if ((opts.pipe_stdin && ::pipe2(in_pipe, O_CLOEXEC) != 0) ||
      (opts.pipe_stdout && ::pipe2(out_pipe, O_CLOEXEC) != 0) ||
      ::pipe2(err_pipe, O_CLOEXEC) != 0) {
    int e = errno;
    cleanup();
    Fail(ErrorClass::kModelCrash, "SpawnFailure",
         std::string("pipe: ") + std::strerror(e));
  }

  const char* workdir = opts.workdir.empty() ? nullptr : opts.workdir.c_str();
  const pid_t parent = ::getpid();
  pid_t pid = ::fork();
  if (pid < 0) {
    int e = errno;
    cleanup();
    Fail(ErrorClass::kModelCrash, "SpawnFailure",
         std::string("fork: ") + std::strerror(e));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    // Do not outlive a harness that was killed outright.
    ::prctl(PR_SET_PDEATHSIG, SIGKILL);
    if (::getppid() != parent) ::_exit(127);
    ::signal(SIGPIPE, SIG_DFL);
    if (opts.pipe_stdin) ::dup2(in_pipe[0], STDIN_FILENO);
    if (opts.pipe_stdout) ::dup2(out_pipe[1], STDOUT_FILENO);
    int code = 0;
    if (workdir && ::chdir(workdir) != 0) {
      code = errno;
    } else {
      ::execve(exe.c_str(), argv.data(), envp.data());
      code = errno;
    }
    ssize_t ignored = ::write(err_pipe[1], &code, sizeof(code));
    (void)ignored;
    ::_exit(127);
  }

  ::setpgid(pid, pid);  // also set in the child; whichever runs first wins
  CloseFd(err_pipe[1]);
  CloseFd(in_pipe[0]);
  CloseFd(out_pipe[1]);
  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(err_pipe[0], &child_errno, sizeof(child_errno));
  } while (n < 0 && errno == EINTR);
  CloseFd(err_pipe[0]);
  if (n == static_cast<ssize_t>(sizeof(child_errno))) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    CloseFd(in_pipe[1]);
    CloseFd(out_pipe[0]);
    Fail(ErrorClass::kModelCrash, "SpawnFailure",
         "cannot start \"" + opts.argv[0] + "\"" +
             (workdir ? std::string(" in ") + workdir : std::string()) + ": " +
             std::strerror(child_errno));
  }

  ChildProcess child;
  child.pid_ = pid;
  child.stdin_fd_ = in_pipe[1];
  child.stdout_fd_ = out_pipe[0];
  if (child.stdin_fd_ >= 0)
    ::fcntl(child.stdin_fd_, F_SETFL, ::fcntl(child.stdin_fd_, F_GETFL) | O_NONBLOCK);
  if (child.stdout_fd_ >= 0)
    ::fcntl(child.stdout_fd_, F_SETFL, ::fcntl(child.stdout_fd_, F_GETFL) | O_NONBLOCK);
  return child;
}

ChildProcess::ChildProcess(ChildProcess&& other) noexcept { *this = std::move(other); }

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
  if (this != &other) {
    Reset();
    pid_ = std::exchange(other.pid_, -1);
    stdin_fd_ = std::exchange(other.stdin_fd_, -1);
    stdout_fd_ = std::exchange(other.stdout_fd_, -1);
    exit_status_ = std::exchange(other.exit_status_, std::nullopt);
    decoder_ = std::move(other.decoder_);
    eof_ = other.eof_;
  }
  return *this;
}

ChildProcess::~ChildProcess() { Reset(); }

void ChildProcess::Reset() noexcept {
  CloseFd(stdin_fd_);
  CloseFd(stdout_fd_);
  if (pid_ > 0 && !exit_status_) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
  }
  pid_ = -1;
  exit_status_.reset();
}

std::optional<std::string> ChildProcess::ReadLine(Clock::time_point deadline,
                                                  const char* timeout_kind) {
  for (;;) {
    if (auto line = decoder_.Next()) return line;
    if (eof_ || stdout_fd_ < 0) return std::nullopt;

    pollfd pfd{stdout_fd_, POLLIN, 0};
    int timeout = RemainingMs(deadline);
    if (timeout == 0)
      Fail(TimeoutClass(timeout_kind), timeout_kind,
           "no complete line from process " + std::to_string(pid_) +
               " before the deadline");
    int rc = ::poll(&pfd, 1, timeout);
    if (rc < 0) {
      if (errno == EINTR) continue;
      Fail(ErrorClass::kOther, "IoError", std::string("poll: ") + std::strerror(errno));
    }
    if (rc == 0) continue;

    char buf[65536];
    ssize_t n = ::read(stdout_fd_, buf, sizeof(buf));
    if (n > 0) {
      decoder_.Append(std::string_view(buf, static_cast<size_t>(n)));
    } else if (n == 0) {
      eof_ = true;
    } else if (errno != EAGAIN && errno != EINTR) {
      eof_ = true;
    }
  }
}

void ChildProcess::WriteAll(std::string_view data, Clock::time_point deadline,
                            const char* timeout_kind) {
  if (stdin_fd_ < 0)
    Fail(ErrorClass::kModelCrash, "ModelCrashed", "model stdin already closed");
  while (!data.empty()) {
    ssize_t n = ::write(stdin_fd_, data.data(), data.size());
    if (n > 0) {
      data.remove_prefix(static_cast<size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && errno == EPIPE)
      Fail(ErrorClass::kModelCrash, "ModelCrashed",
           "model process " + std::to_string(pid_) + " closed its stdin");
    if (n < 0 && errno != EAGAIN)
      Fail(ErrorClass::kModelCrash, "ModelCrashed",
           std::string("write to model failed: ") + std::strerror(errno));
    pollfd pfd{stdin_fd_, POLLOUT, 0};
    int timeout = RemainingMs(deadline);
    if (timeout == 0)
      Fail(TimeoutClass(timeout_kind), timeout_kind,
           "model did not accept input before the deadline");
    ::poll(&pfd, 1, timeout);
  }
}

void ChildProcess::CloseStdin() { CloseFd(stdin_fd_); }

std::optional<int> ChildProcess::TryWait() {
  if (exit_status_) return exit_status_;
  if (pid_ <= 0) return std::nullopt;
  int status = 0;
  pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) exit_status_ = DecodeWaitStatus(status);
  return exit_status_;
}

int ChildProcess::WaitOrKill(double grace_s) {
  auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(grace_s));
  while (!TryWait()) {
    if (Clock::now() >= deadline) {
      ::kill(-pid_, SIGKILL);
      ::kill(pid_, SIGKILL);
      int status = 0;
      while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
      }
      exit_status_ = DecodeWaitStatus(status);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  // Leftover grandchildren in the group go too.
  ::kill(-pid_, SIGKILL);
  CloseFd(stdout_fd_);
  return *exit_status_;
}

}  // namespace effbench::runner
