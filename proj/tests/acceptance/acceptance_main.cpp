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

// Acceptance suite. One check per criterion; prints
//   PASS <name> (<seconds>s) <details>
// or FAIL with the reason. `--only <name>` runs one check, `--list` lists
// them. Exit status is 0 iff every selected check passed.
//
// Checks that exercise the whole harness run the built `effbench`
// executable; the sampler, energy and BLEU checks call the library and
// compare against oracles under tests/oracles.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include "../oracles/bleu_oracle.hpp"
#include "../oracles/poisson_oracle.hpp"
#include "../test_util.hpp"
#include "common/error.hpp"
#include "common/log.hpp"
#include "metering/power.hpp"
#include "metrics/bleu.hpp"
#include "scenario/dataset.hpp"
#include "scenario/poisson.hpp"
#include "scenario/rng.hpp"
#include "scenario/scenario.hpp"

extern char** environ;

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace effbench;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

// ---- pinned tolerances and limits ------------------------------------------

constexpr double kTable1MaxSeconds = 60.0;

constexpr int kPoissonSeeds = 50;
constexpr int kPoissonDraws = 4000;
constexpr double kPoissonMean = 16.0;
constexpr double kPoissonMeanTol = 1.0;
constexpr double kPoissonQuantile = 0.999;
constexpr double kPoissonMaxSeconds = 10.0;

constexpr double kEnergyExactRelTol = 1e-9;  // constant and idle-equal traces
constexpr double kEnergyRampRelTol = 0.005;
constexpr double kEnergyMaxSeconds = 1.0;

constexpr double kLatencyDelayMs = 50.0;
constexpr double kLatencyMaxEpsilonMs = 5.0;
constexpr int kLatencyInstances = 100;
constexpr double kLatencyMaxSeconds = 10.0;

constexpr int kStartupSleepMs = 2000;
constexpr double kStartupRelTol = 0.05;
constexpr double kStartupMaxSeconds = 15.0;

constexpr double kBleuScoreAbsTol = 1e-9;  // on the 0..100 scale
constexpr double kBleuMaxSeconds = 30.0;

constexpr size_t kOfflineTrain = 50000;
constexpr uint64_t kOfflineSample = 8000;
constexpr double kOfflineTarget = 20.0;
constexpr double kOfflineLow = 19.6;
constexpr double kOfflineHigh = 20.4;
constexpr double kOfflineMaxSeconds = 5.0;

constexpr int kSchedulerJobs = 10;
constexpr int kSchedulerJobMs = 1000;
constexpr double kSchedulerMinTotalSeconds = 10.0;
constexpr double kSchedulerMaxSeconds = 30.0;

constexpr double kE2eTimingRelTol = 0.10;

// ---- helpers -----------------------------------------------------------------

struct Outcome {
  bool pass = false;
  std::string details;
};

class Failed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void Require(bool cond, const std::string& what) {
  if (!cond) throw Failed(what);
}

std::string Fmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

double RelDiff(double a, double b) {
  if (a == b) return 0.0;
  return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b));
}

// Starts `effbench <args>` with stdout and stderr appended to `log_path`.
pid_t SpawnCli(const std::vector<std::string>& args, const std::string& log_path) {
  std::vector<std::string> argv_s = {testutil::CliPath()};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&fa, 1, 2);
  posix_spawn_file_actions_addopen(&fa, 0, "/dev/null", O_RDONLY, 0);
  pid_t pid = -1;
  int rc = posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) throw Failed("posix_spawn failed: " + std::string(std::strerror(rc)));
  return pid;
}

int Wait(pid_t pid) {
  int st = 0;
  while (::waitpid(pid, &st, 0) < 0 && errno == EINTR) {
  }
  return WIFEXITED(st) ? WEXITSTATUS(st) : 128 + WTERMSIG(st);
}

int RunCli(const std::vector<std::string>& args, const std::string& log_path) {
  return Wait(SpawnCli(args, log_path));
}

std::string Tail(const std::string& path) {
  std::string s = testutil::ReadFile(path);
  return s.size() > 600 ? s.substr(s.size() - 600) : s;
}

void RequireRun(const std::vector<std::string>& args, const std::string& log) {
  int rc = RunCli(args, log);
  Require(rc == 0, "effbench " + args[0] + " exited " + std::to_string(rc) + ": " + Tail(log));
}

// A self-contained benchmark folder: datasets, manifest and config.
struct Bench {
  testutil::TempDir dir;

  std::string Path(const std::string& name) const { return dir / name; }

  void Data(size_t test_n, size_t train_n) {
    testutil::WriteFile(Path("test.jsonl"), testutil::ToyJsonl(test_n, 8, 21));
    if (train_n) testutil::WriteFile(Path("train.jsonl"), testutil::ToyJsonl(train_n, 8, 22, "tr"));
  }

  void Model(const std::string& name, const std::string& mode,
             const std::vector<std::string>& extra = {}) {
    testutil::WriteFile(Path("model.json"), testutil::SelftestManifest(name, mode, extra).dump());
  }

  std::string Config(json scenarios, json extra = json::object()) const {
    json cfg{{"manifest", "model.json"},
             {"datasets", {{"test", "test.jsonl"}}},
             {"scenarios", scenarios},
             {"seed", 7},
             {"output_dir", "out"},
             {"lock_path", Path("slot.lock")}};
    if (fs::exists(Path("train.jsonl"))) cfg["datasets"]["train"] = "train.jsonl";
    for (auto& [k, v] : extra.items()) cfg[k] = v;
    testutil::WriteFile(Path("run.json"), cfg.dump(2));
    return Path("run.json");
  }

  json Latest(const std::string& model, const std::string& scenario) const {
    return testutil::ReadJson(Path("out/" + model + "." + scenario + ".report.json"));
  }

  std::vector<std::string> History(const std::string& model, const std::string& scenario) const {
    auto index = testutil::ReadJson(Path("out/index.json"));
    std::vector<std::string> out;
    for (const auto& h : index.at(model + "." + scenario).at("history"))
      out.push_back(Path("out/" + h.get<std::string>()));
    return out;
  }
};

std::string SidecarOf(const std::string& report_path) {
  const std::string suffix = ".report.json";
  return report_path.substr(0, report_path.size() - suffix.size()) + ".run.json";
}

bool IsSet(const json& report, const char* key) {
  return report.contains(key) && !report[key].is_null();
}

// ---- criteria ----------------------------------------------------------------

// Metric matrix per scenario kind, written out independently of the harness.
const std::map<std::string, std::set<std::string>> kTable1 = {
    {"fixed", {"accuracy", "throughput", "latency", "memory", "energy", "params"}},
    {"poisson", {"throughput", "latency", "memory", "energy", "params"}},
    {"single_stream", {"latency", "memory", "energy", "params"}},
    {"offline", {"throughput", "memory", "energy", "params"}},
};

Outcome CheckTable1() {
  Bench b;
  b.Data(24, 400);
  b.Model("toy", "translator-toy");
  std::string cfg = b.Config(
      {{{"kind", "fixed"}, {"batch_size", 4}},
       {{"kind", "poisson"}, {"poisson_mean", 4}, {"instance_count", 24}},
       {{"kind", "single_stream"}, {"instance_count", 24}},
       {{"kind", "offline"}, {"instance_count", 24}, {"batch_size", 8}}},
      {{"meter", {{"kind", "synthetic"}, {"shape", "constant"}, {"watts", 150}, {"period_s", 0.01}}},
       {"idle_watts", 100},
       {"intensity_g_per_kwh", 400}});
  RequireRun({"run", "-c", cfg}, b.Path("log.txt"));

  std::vector<std::string> seen;
  for (const auto& [scenario, want] : kTable1) {
    json r = b.Latest("toy", scenario);
    std::map<std::string, std::vector<const char*>> fields = {
        {"accuracy", {"accuracy"}},
        {"throughput", {"throughput_inst_s", "throughput_words_s"}},
        {"latency", {"latency"}},
        {"memory", {"peak_mem_gib"}},
        {"energy", {"energy_wh", "co2_g"}},
        {"params", {"params"}}};
    for (const auto& [metric, keys] : fields) {
      for (const char* key : keys) {
        bool expected = want.count(metric) > 0;
        Require(IsSet(r, key) == expected,
                scenario + ": field " + key + (expected ? " missing" : " present"));
      }
    }
    Require(!IsSet(r, "gpu_mem_gib"), scenario + ": gpu_mem_gib set without a GPU");
    Require(r["params"] == 1000000, scenario + ": params");
    seen.push_back(scenario);
  }
  return {true, "4/4 scenarios match the metric matrix"};
}

Outcome CheckPoissonSampler() {
  PoissonSampler sampler(kPoissonMean);
  std::vector<uint64_t> counts;
  double worst = 0.0;
  for (int seed = 1; seed <= kPoissonSeeds; ++seed) {
    Xoshiro256 rng(static_cast<uint64_t>(seed));
    double sum = 0.0;
    for (int i = 0; i < kPoissonDraws; ++i) {
      uint64_t k = sampler.Draw(rng);
      if (k >= counts.size()) counts.resize(k + 1, 0);
      ++counts[k];
      sum += static_cast<double>(k);
    }
    double dev = std::fabs(sum / kPoissonDraws - kPoissonMean);
    worst = std::max(worst, dev);
    Require(dev <= kPoissonMeanTol, Fmt("seed %d: mean off by %.3f", seed, dev));
  }
  auto chi = oracle::PoissonChiSquare(counts, kPoissonMean);
  boost::math::chi_squared dist(chi.dof);
  double q = boost::math::quantile(dist, kPoissonQuantile);
  Require(chi.statistic < q, Fmt("chi-square %.2f >= %.2f (dof %d)", chi.statistic, q, chi.dof));

  Dataset data = Dataset::Parse(testutil::ToyJsonl(kPoissonDraws, 6, 9));
  auto plan = [&](uint64_t seed) {
    ScenarioConfig cfg = ScenarioConfig::FromJson(
        {{"kind", "poisson"}, {"poisson_mean", kPoissonMean}, {"instance_count", kPoissonDraws}}, seed);
    return PlanPoisson(data, cfg).BatchSizes();
  };
  Require(plan(3) == plan(3), "same seed gave different batch sizes");
  Require(plan(3) != plan(4), "different seeds gave the same batch sizes");
  return {true, Fmt("max |mean-16| %.3f; chi2 %.1f < %.1f (dof %d); plans repeat per seed", worst,
                    chi.statistic, q, chi.dof)};
}

Outcome CheckEnergyOracle() {
  testutil::TempDir tmp;
  auto replay = [&](const std::string& name, double period, double duration,
                    const std::function<double(double)>& watts) {
    std::string csv = "t_s,watts\n";
    long n = std::lround(duration / period);
    for (long i = 0; i <= n; ++i) {
      double t = static_cast<double>(i) * period;
      csv += Fmt("%.17g,%.17g\n", t, watts(t));
    }
    testutil::WriteFile(tmp / name, csv);
    auto meter = metering::MakeMeter({{"kind", "replay"}, {"path", tmp / name}});
    meter->Start();
    metering::PowerTrace trace;
    trace.samples = meter->Stop(duration);
    trace.sampling_period_s = meter->SamplingPeriod();
    return trace;
  };
  auto energy = [](metering::PowerTrace trace, double idle, double end) {
    trace.idle_watts = idle;
    return metering::IntegrateEnergy(trace, 0.0, end).energy_wh;
  };

  // 300 W for 30 min against 100 W idle: 200 W * 0.5 h.
  double constant = energy(replay("const.csv", 1.0, 1800.0, [](double) { return 300.0; }), 100.0, 1800.0);
  double e_const = RelDiff(constant, 100.0);
  Require(e_const < kEnergyExactRelTol, Fmt("constant: %.12g Wh", constant));

  double idle_eq = energy(replay("idle.csv", 1.0, 1800.0, [](double) { return 100.0; }), 100.0, 1800.0);
  Require(idle_eq == 0.0, Fmt("idle-equal: %.3g Wh", idle_eq));

  // 100 -> 300 W over 1 h: mean excess 100 W.
  double ramp = energy(replay("ramp.csv", 10.0, 3600.0, [](double t) { return 100.0 + 200.0 * t / 3600.0; }),
                       100.0, 3600.0);
  double e_ramp = RelDiff(ramp, 100.0);
  Require(e_ramp < kEnergyRampRelTol, Fmt("ramp: %.9g Wh", ramp));

  // 0 -> 300 W with idle 100: the kink at 1200 s is where trapezoids err.
  // Excess area 0.5 * 2400 s * 200 W.
  const double clipped_exact = 0.5 * 2400.0 * 200.0 / 3600.0;
  double prev = INFINITY, e_clip = 0.0;
  for (double period : {450.0, 90.0, 18.0, 3.6}) {
    double e = energy(replay("clip.csv", period, 3600.0, [](double t) { return 300.0 * t / 3600.0; }),
                      100.0, 3600.0);
    e_clip = RelDiff(e, clipped_exact);
    Require(e_clip <= prev, Fmt("clipped ramp error grew at period %g s", period));
    prev = e_clip;
  }
  Require(e_clip < kEnergyRampRelTol, Fmt("clipped ramp error %.4g", e_clip));

  for (double wh : {0.0, 1e-6, 0.37, 100.0, 12345.678})
    for (double intensity : {0.0, 1.0, 432.0, 812.5}) {
      double got = metering::Co2FromEnergy(wh, intensity);
      Require(got == wh / 1000.0 * intensity, Fmt("CO2 identity at %g Wh, %g g/kWh", wh, intensity));
    }
  return {true, Fmt("rel err constant %.1e, ramp %.1e, clipped ramp %.2e; idle-equal 0", e_const,
                    e_ramp, e_clip)};
}

Outcome CheckLatencyFidelity() {
  auto p = [&](const std::string& mode, double* p99) {
    Bench b;
    b.Data(kLatencyInstances, 0);
    b.Model("lat", mode);
    std::string cfg = b.Config({{{"kind", "single_stream"}, {"instance_count", kLatencyInstances}}});
    RequireRun({"run", "-c", cfg}, b.Path("log.txt"));
    json r = b.Latest("lat", "single_stream");
    Require(r["latency"]["n"] == kLatencyInstances, mode + ": latency sample count");
    if (p99) *p99 = r["latency"]["p99_ms"].get<double>();
    return r["latency"]["p50_ms"].get<double>();
  };
  double eps = 0.0;
  p("delay:0", &eps);
  Require(eps <= kLatencyMaxEpsilonMs, Fmt("harness overhead %.3f ms > %.1f ms", eps, kLatencyMaxEpsilonMs));
  double p50 = p("delay:" + std::to_string(static_cast<int>(kLatencyDelayMs)), nullptr);
  Require(p50 >= kLatencyDelayMs && p50 <= kLatencyDelayMs + eps,
          Fmt("p50 %.3f ms outside [%.1f, %.3f]", p50, kLatencyDelayMs, kLatencyDelayMs + eps));
  return {true, Fmt("eps %.3f ms; p50 %.3f ms in [%.0f, %.3f]", eps, p50, kLatencyDelayMs,
                    kLatencyDelayMs + eps)};
}

Outcome CheckMeasurementStart() {
  auto measure = [&](int startup_ms) {
    Bench b;
    b.Data(200, 0);
    b.Model("m", "delay:20", {"--startup-ms", std::to_string(startup_ms)});
    std::string cfg = b.Config({{{"kind", "fixed"}, {"batch_size", 4}}});
    RequireRun({"run", "-c", cfg}, b.Path("log.txt"));
    json r = b.Latest("m", "fixed");
    return std::pair<double, double>{r["throughput_inst_s"].get<double>(),
                                     r["latency"]["p50_ms"].get<double>()};
  };
  auto [tp0, lat0] = measure(0);
  auto [tp1, lat1] = measure(kStartupSleepMs);
  double d_tp = RelDiff(tp0, tp1), d_lat = RelDiff(lat0, lat1);
  Require(d_tp <= kStartupRelTol, Fmt("throughput %.2f vs %.2f inst/s", tp0, tp1));
  Require(d_lat <= kStartupRelTol, Fmt("p50 %.3f vs %.3f ms", lat0, lat1));
  return {true, Fmt("throughput %.2f vs %.2f inst/s (%.2f%%); p50 %.3f vs %.3f ms (%.2f%%)", tp0, tp1,
                    100 * d_tp, lat0, lat1, 100 * d_lat)};
}

// All strings of 0..max_len words over `vocab`.
std::vector<std::string> AllSentences(const std::vector<std::string>& vocab, size_t max_len) {
  std::vector<std::string> out = {""};
  std::vector<std::string> frontier = {""};
  for (size_t len = 1; len <= max_len; ++len) {
    std::vector<std::string> next;
    for (const auto& s : frontier)
      for (const auto& w : vocab) next.push_back(s.empty() ? w : s + " " + w);
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

Outcome CheckBleuOracle() {
  using Refs = std::vector<std::vector<std::string>>;
  size_t corpora = 0;
  auto compare = [&](const std::vector<std::string>& hyps, const Refs& refs) {
    ++corpora;
    auto got = metrics::CorpusBleuStats(hyps, refs);
    auto want = oracle::CorpusStats(hyps, refs);
    bool same = got.hyp_len == want.hyp_len && got.ref_len == want.ref_len;
    for (int n = 0; n < 4; ++n)
      same = same && got.matches[n] == want.matches[n] && got.totals[n] == want.totals[n];
    double s_got = metrics::BleuFromStats(got), s_want = oracle::Score(want);
    if (!same || std::fabs(s_got - s_want) > kBleuScoreAbsTol) {
      std::string h = json(hyps).dump(), r = json(refs).dump();
      throw Failed(Fmt("mismatch on hyps=%s refs=%s: %.12g vs %.12g", h.c_str(), r.c_str(), s_got, s_want));
    }
  };

  // Exhaustive: every single-sentence corpus with hypothesis and reference
  // of up to 4 words over {a, b}.
  auto two = AllSentences({"a", "b"}, 4);
  for (const auto& h : two)
    for (const auto& r : two) compare({h}, {{r}});
  // Exhaustive: up to 3 words over {a, b, c} against every pair of
  // references of up to 2 words.
  auto three = AllSentences({"a", "b", "c"}, 3);
  auto short_refs = AllSentences({"a", "b", "c"}, 2);
  for (const auto& h : three)
    for (const auto& r1 : short_refs)
      for (const auto& r2 : short_refs) compare({h}, {{r1, r2}});
  // Exhaustive: two-sentence corpora, up to 2 words over {a, "b,"}.
  auto punct = AllSentences({"a", "b,"}, 2);
  for (const auto& h1 : punct)
    for (const auto& h2 : punct)
      for (const auto& r1 : punct)
        for (const auto& r2 : punct) compare({h1, h2}, {{r1}, {r2}});
  // Random corpora of 1..5 sentences over a 10-word vocabulary.
  std::mt19937_64 rng(2026);
  const std::vector<std::string> vocab = {"the", "cat", "sat", "on", "mat", "a", ".", "dog,", "ran", "far"};
  auto sentence = [&] {
    std::string s;
    size_t len = rng() % 9;
    for (size_t k = 0; k < len; ++k) s += (k ? " " : "") + vocab[rng() % vocab.size()];
    return s;
  };
  for (int trial = 0; trial < 20000; ++trial) {
    size_t n = 1 + rng() % 5;
    std::vector<std::string> hyps;
    Refs refs(n);
    for (size_t i = 0; i < n; ++i) {
      hyps.push_back(sentence());
      size_t nr = 1 + rng() % 3;
      for (size_t j = 0; j < nr; ++j) refs[i].push_back(sentence());
    }
    compare(hyps, refs);
  }

  std::vector<std::string> identity = {"the cat sat on the mat .", "a dog , ran far", "x y z w v"};
  Refs id_refs;
  for (const auto& s : identity) id_refs.push_back({s});
  double id = metrics::CorpusBleu(identity, id_refs);
  Require(id == 100.0, Fmt("identity corpus scored %.17g", id));
  return {true, Fmt("%zu corpora match the oracle; identity = %.1f", corpora, id)};
}

Outcome CheckOfflineSampler() {
  std::mt19937_64 rng(31);
  auto make = [&](const std::string& prefix, size_t n) {
    std::vector<Instance> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      size_t len = 1 + rng() % 50;
      std::string text;
      for (size_t k = 0; k < len; ++k) text += (k ? " w" : "w") + std::to_string(rng() % 5000);
      out.push_back({prefix + std::to_string(i), text, {}});
    }
    return out;
  };
  auto test = make("test", 2000);
  auto train = make("train", kOfflineTrain);
  // Plant a quarter of the test inputs in the training split.
  std::unordered_set<std::string> test_inputs;
  for (size_t i = 0; i < test.size(); ++i) {
    test_inputs.insert(test[i].input);
    if (i % 4 == 0) train[i * 20].input = test[i].input;
  }
  Dataset train_set(std::move(train));
  ScenarioConfig cfg = ScenarioConfig::FromJson(
      {{"kind", "offline"}, {"instance_count", kOfflineSample}}, 5);
  OfflineJob job = PlanOffline(train_set, kOfflineTarget, cfg, test_inputs);

  auto sampled = job.plan.Flatten();
  Require(sampled.size() == kOfflineSample, Fmt("sampled %zu instances", sampled.size()));
  std::set<std::string> ids;
  size_t words = 0, leaked = 0;
  for (const Instance* inst : sampled) {
    ids.insert(inst->id);
    std::istringstream ws(inst->input);
    std::string w;
    while (ws >> w) ++words;
    leaked += test_inputs.count(inst->input);
  }
  double mean = static_cast<double>(words) / static_cast<double>(sampled.size());
  Require(ids.size() == sampled.size(), "sample has repeated instances");
  Require(leaked == 0, Fmt("%zu test inputs leaked into the sample", leaked));
  Require(mean >= kOfflineLow && mean <= kOfflineHigh, Fmt("sample mean length %.4f", mean));
  return {true, Fmt("mean length %.4f in [%.1f, %.1f]; 0 of 500 planted test inputs sampled; %d attempt(s)",
                    mean, kOfflineLow, kOfflineHigh, job.attempts)};
}

struct SlotEvent {
  int64_t ns = 0;
  std::string kind, job;
};

std::vector<SlotEvent> ReadSlotTranscript(const std::string& path) {
  std::vector<SlotEvent> out;
  std::istringstream in(testutil::ReadFile(path));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    SlotEvent e;
    if (ls >> e.ns >> e.kind >> e.job) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const SlotEvent& a, const SlotEvent& b) { return a.ns < b.ns; });
  return out;
}

// Processes whose command line mentions `needle`.
int CountProcesses(const std::string& needle) {
  int n = 0;
  for (const auto& e : fs::directory_iterator("/proc")) {
    std::string name = e.path().filename();
    if (name.empty() || !std::isdigit(static_cast<unsigned char>(name[0]))) continue;
    std::string cmd = testutil::ReadFile(e.path() / "cmdline");
    std::replace(cmd.begin(), cmd.end(), '\0', ' ');
    if (cmd.find(needle) != std::string::npos && cmd.find("selftest-model") != std::string::npos) ++n;
  }
  return n;
}

Outcome CheckSchedulerExclusion() {
  testutil::TempDir tmp;
  const std::string lock = tmp / "slot.lock", transcript = tmp / "slot.log";
  testutil::WriteFile(tmp / "test.jsonl", testutil::ToyJsonl(1, 4, 1));
  auto job_config = [&](const std::string& name, int delay_ms) {
    fs::create_directories(tmp / name);
    testutil::WriteFile(tmp / (name + "/model.json"),
                        testutil::SelftestManifest(name, "delay:" + std::to_string(delay_ms)).dump());
    json cfg{{"manifest", "model.json"},
             {"datasets", {{"test", tmp / "test.jsonl"}}},
             {"scenarios", {{{"kind", "single_stream"}, {"instance_count", 1}}}},
             {"output_dir", "out"},
             {"lock_path", lock},
             {"lock_transcript", transcript},
             {"heartbeat_s", 0.25}};
    testutil::WriteFile(tmp / (name + "/run.json"), cfg.dump());
    return tmp / (name + "/run.json");
  };

  // Part 1: concurrent jobs serialize.
  std::vector<std::string> configs;
  for (int k = 0; k < kSchedulerJobs; ++k) configs.push_back(job_config("job" + std::to_string(k), kSchedulerJobMs));
  auto t0 = Clock::now();
  std::vector<pid_t> pids;
  for (int k = 0; k < kSchedulerJobs; ++k)
    pids.push_back(SpawnCli({"run", "-c", configs[k]}, tmp / ("job" + std::to_string(k) + ".log")));
  for (int k = 0; k < kSchedulerJobs; ++k) {
    int rc = Wait(pids[k]);
    Require(rc == 0, Fmt("job%d exited %d: ", k, rc) + Tail(tmp / ("job" + std::to_string(k) + ".log")));
  }
  double total = testutil::Since(t0);
  Require(total >= kSchedulerMinTotalSeconds, Fmt("%d jobs finished in %.2f s", kSchedulerJobs, total));

  auto events = ReadSlotTranscript(transcript);
  std::string holder;
  int acquires = 0;
  for (const auto& e : events) {
    if (e.kind == "acquire") {
      Require(holder.empty(), e.job + " acquired while " + holder + " held the slot");
      holder = e.job;
      ++acquires;
    } else if (e.kind == "release") {
      Require(holder == e.job, "release by " + e.job + " while holder is '" + holder + "'");
      holder.clear();
    }
  }
  Require(acquires == kSchedulerJobs && holder.empty(), Fmt("%d acquisitions in transcript", acquires));

  // Part 2: kill the holder mid-run; the next waiter proceeds.
  std::string victim_cfg = job_config("victim", 20000);
  std::string waiter_cfg = job_config("waiter", 200);
  pid_t victim = SpawnCli({"run", "-c", victim_cfg}, tmp / "victim.log");
  auto has_event = [&](const std::string& kind, const std::string& job) {
    for (const auto& e : ReadSlotTranscript(transcript))
      if (e.kind == kind && e.job == job) return true;
    return false;
  };
  auto deadline = Clock::now() + 10s;
  while (!has_event("acquire", "victim/single_stream") && Clock::now() < deadline) std::this_thread::sleep_for(10ms);
  Require(has_event("acquire", "victim/single_stream"), "victim never acquired the slot");
  pid_t waiter = SpawnCli({"run", "-c", waiter_cfg}, tmp / "waiter.log");
  std::this_thread::sleep_for(300ms);
  auto kill_at = Clock::now();
  ::kill(victim, SIGKILL);
  Wait(victim);
  int rc = Wait(waiter);
  double recovered = testutil::Since(kill_at);
  Require(rc == 0, Fmt("waiter exited %d: ", rc) + Tail(tmp / "waiter.log"));
  Require(has_event("reclaim", "victim/single_stream"), "no reclaim of the killed holder's slot");
  std::this_thread::sleep_for(200ms);
  Require(CountProcesses(" victim") == 0, "the killed holder's model outlived it");
  return {true, Fmt("%d jobs took %.2f s, no overlap; waiter finished %.2f s after the holder was killed",
                    kSchedulerJobs, total, recovered)};
}

Outcome CheckEndToEnd() {
  Bench b;
  b.Data(24, 300);
  b.Model("toy", "translator-toy", {"--delay-ms", "30"});
  // Power burst in the first 10 ms, idle afterwards: energy depends only on
  // the burst as long as each run outlasts it.
  std::string csv = "t_s,watts\n";
  for (int i = 0; i <= 15000; ++i) csv += Fmt("%.3f,%d\n", i * 0.002, i * 0.002 <= 0.01 + 1e-12 ? 250 : 100);
  testutil::WriteFile(b.Path("trace.csv"), csv);
  std::string cfg = b.Config({{{"kind", "fixed"}, {"batch_size", 4}},
                              {{"kind", "poisson"}, {"poisson_mean", 3}, {"instance_count", 24}},
                              {{"kind", "single_stream"}, {"instance_count", 12}},
                              {{"kind", "offline"}, {"instance_count", 24}}},
                             {{"meter", {{"kind", "replay"}, {"path", "trace.csv"}}},
                              {"idle_watts", 100},
                              {"intensity_g_per_kwh", 400}});
  RequireRun({"run", "-c", cfg}, b.Path("log1.txt"));
  RequireRun({"run", "-c", cfg}, b.Path("log2.txt"));

  double worst = 0.0;
  std::string worst_field;
  for (const char* scenario : {"fixed", "poisson", "single_stream", "offline"}) {
    auto hist = b.History("toy", scenario);
    Require(hist.size() == 2, std::string(scenario) + ": expected two reports");
    json r1 = testutil::ReadJson(hist[0]), r2 = testutil::ReadJson(hist[1]);
    json s1 = testutil::ReadJson(SidecarOf(hist[0])), s2 = testutil::ReadJson(SidecarOf(hist[1]));
    std::string sc = scenario;
    Require(s1["plan"] == s2["plan"], sc + ": plans differ");
    Require(r1["header"]["plan_digest"] == r2["header"]["plan_digest"], sc + ": plan digests differ");
    Require(s1["outputs"] == s2["outputs"], sc + ": outputs differ");
    Require(r1["accuracy"] == r2["accuracy"], sc + ": accuracy differs");
    Require(IsSet(r1, "energy_wh") && r1["energy_wh"] == r2["energy_wh"], sc + ": energy differs");
    Require(r1["co2_g"] == r2["co2_g"], sc + ": CO2 differs");
    std::vector<std::pair<std::string, json::json_pointer>> timing = {
        {"throughput_inst_s", json::json_pointer("/throughput_inst_s")},
        {"throughput_words_s", json::json_pointer("/throughput_words_s")},
        {"latency.mean_ms", json::json_pointer("/latency/mean_ms")},
        {"latency.p50_ms", json::json_pointer("/latency/p50_ms")},
        {"latency.p90_ms", json::json_pointer("/latency/p90_ms")},
        {"latency.p99_ms", json::json_pointer("/latency/p99_ms")},
        {"latency.max_ms", json::json_pointer("/latency/max_ms")},
        {"run.active_s", json::json_pointer("/run/active_s")}};
    for (const auto& [name, ptr] : timing) {
      if (!r1.contains(ptr) || r1[ptr].is_null()) continue;
      double d = RelDiff(r1[ptr].get<double>(), r2[ptr].get<double>());
      if (d > worst) worst = d, worst_field = sc + " " + name;
      Require(d <= kE2eTimingRelTol, Fmt("%s %s: %.4g vs %.4g", scenario, name.c_str(),
                                         r1[ptr].get<double>(), r2[ptr].get<double>()));
    }
  }
  return {true, Fmt("plans, outputs, accuracy, energy identical; worst timing diff %.2f%% (%s)", 100 * worst,
                    worst_field.c_str())};
}

struct Criterion {
  const char* name;
  double max_seconds;  // 0: no runtime bound
  Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {"table1_conformance", kTable1MaxSeconds, CheckTable1},
    {"poisson_sampler", kPoissonMaxSeconds, CheckPoissonSampler},
    {"energy_oracle", kEnergyMaxSeconds, CheckEnergyOracle},
    {"latency_fidelity", kLatencyMaxSeconds, CheckLatencyFidelity},
    {"measurement_start", kStartupMaxSeconds, CheckMeasurementStart},
    {"bleu_oracle", kBleuMaxSeconds, CheckBleuOracle},
    {"offline_sampler", kOfflineMaxSeconds, CheckOfflineSampler},
    {"scheduler_exclusion", kSchedulerMaxSeconds, CheckSchedulerExclusion},
    {"e2e_determinism", 0.0, CheckEndToEnd},
};

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else if (a == "--list") {
      for (const auto& c : kCriteria) std::printf("%s\n", c.name);
      return 0;
    } else {
      std::fprintf(stderr, "usage: %s [--only NAME] [--list]\n", argv[0]);
      return 2;
    }
  }
  effbench::log::SetLevel(effbench::log::Level::kError);

  int failed = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && only != c.name) continue;
    ++ran;
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const Failed& e) {
      o = {false, e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = testutil::Since(t0);
    if (o.pass && c.max_seconds > 0.0 && secs >= c.max_seconds) {
      o.pass = false;
      o.details = Fmt("took %.2f s, limit %.0f s; ", secs, c.max_seconds) + o.details;
    }
    std::printf("%s %s (%.2fs) %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.details.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion named '%s'\n", only.c_str());
    return 2;
  }
  return failed ? 1 : 0;
}
