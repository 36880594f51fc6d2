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

#include "metering/power.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "common/error.hpp"
#include "common/log.hpp"
#include "common/text.hpp"

namespace effbench::metering {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void MeterFail(const std::string& kind, const std::string& msg) {
  Fail(ErrorClass::kMetering, kind, msg);
}

double NumberOr(const json& spec, const char* key, double fallback) {
  if (!spec.contains(key)) return fallback;
  if (!spec[key].is_number())
    ConfigError(std::string("meter field \"") + key + "\" must be a number");
  return spec[key].get<double>();
}

std::string ResolvePath(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute())
    return path;
  return (fs::path(base_dir) / path).string();
}

class ReplayMeter : public PowerMeter {
 public:
  explicit ReplayMeter(std::string path)
      : path_(std::move(path)), samples_(LoadTraceCsv(path_)) {
    period_ = MedianPeriod(samples_);
  }

  std::string Describe() const override { return "replay:" + path_; }
  bool IsLive() const override { return false; }
  double SamplingPeriod() const override { return period_; }
  void Start() override {}
  std::vector<PowerSample> Stop(double) override { return samples_; }

 private:
  std::string path_;
  std::vector<PowerSample> samples_;
  double period_ = 0.0;
};

class SyntheticMeter : public PowerMeter {
 public:
  explicit SyntheticMeter(const json& spec) {
    shape_ = spec.value("shape", std::string("constant"));
    period_ = NumberOr(spec, "period_s", 0.1);
    if (!(period_ > 0.0)) ConfigError("synthetic meter period_s must be > 0");
    if (shape_ == "constant") {
      a_ = NumberOr(spec, "watts", 0.0);
    } else if (shape_ == "ramp") {
      a_ = NumberOr(spec, "from", 0.0);
      b_ = NumberOr(spec, "to", 0.0);
      c_ = NumberOr(spec, "duration_s", 1.0);
      if (!(c_ > 0.0)) ConfigError("synthetic ramp duration_s must be > 0");
    } else if (shape_ == "square") {
      a_ = NumberOr(spec, "low", 0.0);
      b_ = NumberOr(spec, "high", 0.0);
      c_ = NumberOr(spec, "half_period_s", period_);
      if (!(c_ > 0.0)) ConfigError("synthetic square half_period_s must be > 0");
    } else {
      ConfigError("unknown synthetic meter shape \"" + shape_ + "\"");
    }
    if (a_ < 0.0 || b_ < 0.0) ConfigError("synthetic meter watts must be >= 0");
  }

  std::string Describe() const override { return "synthetic:" + shape_; }
  bool IsLive() const override { return false; }
  double SamplingPeriod() const override { return period_; }
  void Start() override {}

  std::vector<PowerSample> Stop(double until_s) override {
    const auto n = static_cast<size_t>(std::ceil(std::max(until_s, 0.0) / period_));
    std::vector<PowerSample> out;
    out.reserve(n + 1);
    for (size_t k = 0; k <= n; ++k) {
      double t = static_cast<double>(k) * period_;
      out.push_back({t, At(t)});
    }
    return out;
  }

 private:
  double At(double t) const {
    if (shape_ == "constant") return a_;
    if (shape_ == "ramp") return t >= c_ ? b_ : a_ + (b_ - a_) * (t / c_);
    // square: low for the first half period, then high, alternating
    auto phase = static_cast<uint64_t>(std::floor(t / c_));
    return (phase % 2 == 0) ? a_ : b_;
  }

  std::string shape_;
  double period_ = 0.1;
  double a_ = 0.0;
  double b_ = 0.0;
  double c_ = 1.0;
};

// Sums the package-level energy counters exposed under powercap.
class RaplMeter : public PowerMeter {
 public:
  RaplMeter(const std::string& root, double period) : root_(root), period_(period) {
    if (!(period_ > 0.0)) ConfigError("rapl meter period_s must be > 0");
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root_, ec)) {
      std::string name = entry.path().filename().string();
      // Top-level domains only: intel-rapl:0, not intel-rapl:0:0.
      if (name.rfind("intel-rapl:", 0) != 0) continue;
      if (name.find(':', 11) != std::string::npos) continue;
      Domain d;
      d.energy_path = (entry.path() / "energy_uj").string();
      d.range_uj = ReadCounter((entry.path() / "max_energy_range_uj").string(), 0);
      if (ReadCounter(d.energy_path, -1) < 0) continue;
      domains_.push_back(d);
    }
    if (domains_.empty())
      MeterFail("MeterUnavailable", "no readable RAPL energy counters under " + root_);
  }

  ~RaplMeter() override { Halt(); }

  std::string Describe() const override { return "rapl:" + root_; }
  bool IsLive() const override { return true; }
  double SamplingPeriod() const override { return period_; }

  void Start() override {
    Halt();
    samples_.clear();
    stop_ = false;
    origin_ = Clock::now();
    last_t_ = 0.0;
    for (auto& d : domains_) d.last = ReadCounter(d.energy_path, 0);
    thread_ = std::thread([this] { Loop(); });
  }

  std::vector<PowerSample> Stop(double) override {
    Halt();
    TakeSample();
    std::lock_guard<std::mutex> lock(mu_);
    return samples_;
  }

 private:
  using Clock = std::chrono::steady_clock;

  struct Domain {
    std::string energy_path;
    long long range_uj = 0;
    long long last = 0;
  };

  static long long ReadCounter(const std::string& path, long long fallback) {
    std::ifstream in(path);
    long long v = 0;
    if (!(in >> v)) return fallback;
    return v;
  }

  void TakeSample() {
    double t = std::chrono::duration<double>(Clock::now() - origin_).count();
    double dt = t - last_t_;
    if (dt <= 0.0) return;
    double joules = 0.0;
    for (auto& d : domains_) {
      long long now = ReadCounter(d.energy_path, d.last);
      long long delta = now - d.last;
      if (delta < 0 && d.range_uj > 0) delta += d.range_uj;
      d.last = now;
      joules += static_cast<double>(std::max(delta, 0LL)) * 1e-6;
    }
    std::lock_guard<std::mutex> lock(mu_);
    double watts = joules / dt;
    // The interval's average power also stands for the recording start.
    if (samples_.empty()) samples_.push_back({0.0, watts});
    if (t > samples_.back().t) samples_.push_back({t, watts});
    last_t_ = t;
  }

  void Loop() {
    std::unique_lock<std::mutex> lock(wake_mu_);
    auto next = Clock::now();
    while (!stop_) {
      next += std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(period_));
      if (wake_.wait_until(lock, next, [this] { return stop_.load(); })) break;
      lock.unlock();
      TakeSample();
      lock.lock();
    }
  }

  void Halt() {
    {
      std::lock_guard<std::mutex> lock(wake_mu_);
      stop_ = true;
    }
    wake_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  std::string root_;
  double period_;
  std::vector<Domain> domains_;
  std::vector<PowerSample> samples_;
  std::mutex mu_;
  std::mutex wake_mu_;
  std::condition_variable wake_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
  Clock::time_point origin_;
  double last_t_ = 0.0;
};

}  // namespace

json ParseMeterSpec(std::string_view text) {
  std::string_view t = Trim(text);
  if (!t.empty() && t.front() == '{') {
    json j = json::parse(t, nullptr, false);
    if (j.is_discarded()) ConfigError("meter spec is not valid JSON");
    return j;
  }
  json j;
  if (t == "none" || t.empty()) {
    j["kind"] = "none";
  } else if (t.rfind("replay:", 0) == 0) {
    j["kind"] = "replay";
    j["path"] = std::string(t.substr(7));
  } else if (t == "rapl") {
    j["kind"] = "rapl";
  } else if (t.rfind("rapl:", 0) == 0) {
    j["kind"] = "rapl";
    j["path"] = std::string(t.substr(5));
  } else {
    ConfigError("unrecognized meter spec \"" + std::string(t) + "\"");
  }
  return j;
}

std::unique_ptr<PowerMeter> MakeMeter(const json& spec, const std::string& base_dir) {
  if (spec.is_null()) return nullptr;
  if (spec.is_string()) return MakeMeter(ParseMeterSpec(spec.get<std::string>()), base_dir);
  if (!spec.is_object() || !spec.contains("kind") || !spec["kind"].is_string())
    ConfigError("meter spec needs a string \"kind\"");
  const std::string kind = spec["kind"].get<std::string>();
  if (kind == "none") return nullptr;
  if (kind == "replay") {
    if (!spec.contains("path") || !spec["path"].is_string())
      ConfigError("replay meter needs \"path\"");
    return std::make_unique<ReplayMeter>(
        ResolvePath(spec["path"].get<std::string>(), base_dir));
  }
  if (kind == "synthetic") return std::make_unique<SyntheticMeter>(spec);
  if (kind == "rapl") {
    std::string root = spec.value("path", std::string("/sys/class/powercap"));
    return std::make_unique<RaplMeter>(root, NumberOr(spec, "period_s", 0.1));
  }
  ConfigError("unknown meter kind \"" + kind + "\"");
}

std::vector<PowerSample> ParseTraceCsv(std::string_view text) {
  std::vector<PowerSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = Trim(line);
    if (l.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (l != "t_s,watts")
        MeterFail("TraceFormat", "trace header must be \"t_s,watts\", got \"" +
                                     Excerpt(l) + "\"");
      continue;
    }
    size_t comma = l.find(',');
    if (comma == std::string_view::npos)
      MeterFail("TraceFormat", "line " + std::to_string(line_no) + " lacks a comma");
    PowerSample s;
    try {
      size_t used = 0;
      std::string a(Trim(l.substr(0, comma)));
      std::string b(Trim(l.substr(comma + 1)));
      s.t = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      s.watts = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
    } catch (const std::exception&) {
      MeterFail("TraceFormat", "unparseable number on line " + std::to_string(line_no));
    }
    if (!std::isfinite(s.t) || !std::isfinite(s.watts) || s.watts < 0.0)
      MeterFail("TraceFormat", "invalid sample on line " + std::to_string(line_no));
    if (!out.empty() && !(s.t > out.back().t))
      MeterFail("TraceFormat", "t_s must be strictly increasing (line " +
                                   std::to_string(line_no) + ")");
    out.push_back(s);
  }
  if (!header_seen) MeterFail("TraceFormat", "empty trace");
  return out;
}

std::vector<PowerSample> LoadTraceCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) MeterFail("MeterUnavailable", "cannot open replay trace " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseTraceCsv(ss.str());
}

double MedianPeriod(const std::vector<PowerSample>& samples) {
  if (samples.size() < 2) return 0.0;
  std::vector<double> diffs;
  diffs.reserve(samples.size() - 1);
  for (size_t i = 1; i < samples.size(); ++i)
    diffs.push_back(samples[i].t - samples[i - 1].t);
  auto mid = diffs.begin() + static_cast<ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return *mid;
}

double MeasureIdleBaseline(PowerMeter* meter, double duration_s) {
  if (meter == nullptr) MeterFail("MeterUnavailable", "no power meter configured");
  if (!(duration_s > 0.0)) ConfigError("baseline duration must be > 0");
  meter->Start();
  if (meter->IsLive())
    std::this_thread::sleep_for(std::chrono::duration<double>(duration_s));
  std::vector<PowerSample> samples = meter->Stop(duration_s);
  double sum = 0.0;
  size_t n = 0;
  for (const auto& s : samples) {
    if (s.t < 0.0 || s.t > duration_s) continue;
    sum += s.watts;
    ++n;
  }
  if (n < 5)
    MeterFail("InsufficientSamples", "idle baseline needs at least 5 samples, got " +
                                         std::to_string(n));
  return sum / static_cast<double>(n);
}

EnergyReport IntegrateEnergy(const PowerTrace& trace, double start_s, double end_s) {
  const auto& s = trace.samples;
  if (!(end_s > start_s))
    MeterFail("EmptyWindow", "energy window end must follow its start");
  if (s.size() < 2)
    MeterFail("TraceCoverage", "power trace needs at least two samples");
  const double period =
      trace.sampling_period_s > 0.0 ? trace.sampling_period_s : MedianPeriod(s);

  if (s.front().t > start_s + period || s.back().t < end_s - period) {
    std::ostringstream msg;
    msg << "trace spans [" << s.front().t << ", " << s.back().t
        << "] s but the run window is [" << start_s << ", " << end_s << "] s";
    MeterFail("TraceCoverage", msg.str());
  }
  for (size_t i = 1; i < s.size(); ++i) {
    if (s[i].t <= start_s || s[i - 1].t >= end_s) continue;
    if (s[i].t - s[i - 1].t > 5.0 * period) {
      std::ostringstream msg;
      msg << "samples at " << s[i - 1].t << " s and " << s[i].t
          << " s are more than 5 sampling periods apart";
      MeterFail("TraceGap", msg.str());
    }
  }

  auto watts_at = [&](double t) {
    if (t <= s.front().t) return s.front().watts;
    if (t >= s.back().t) return s.back().watts;
    auto hi = std::upper_bound(s.begin(), s.end(), t,
                               [](double v, const PowerSample& p) { return v < p.t; });
    auto lo = hi - 1;
    double f = (t - lo->t) / (hi->t - lo->t);
    return lo->watts + f * (hi->watts - lo->watts);
  };
  auto net = [&](double w) { return std::max(0.0, w - trace.idle_watts); };

  double joules = 0.0;
  double prev_t = start_s;
  double prev_w = net(watts_at(start_s));
  auto first_inside = std::upper_bound(
      s.begin(), s.end(), start_s,
      [](double v, const PowerSample& p) { return v < p.t; });
  for (auto it = first_inside; it != s.end() && it->t < end_s; ++it) {
    double w = net(it->watts);
    joules += 0.5 * (prev_w + w) * (it->t - prev_t);
    prev_t = it->t;
    prev_w = w;
  }
  double end_w = net(watts_at(end_s));
  joules += 0.5 * (prev_w + end_w) * (end_s - prev_t);

  EnergyReport report;
  report.energy_wh = joules / 3600.0;
  return report;
}

double Co2FromEnergy(double energy_wh, double intensity_g_per_kwh) {
  return energy_wh / 1000.0 * intensity_g_per_kwh;
}

}  // namespace effbench::metering
