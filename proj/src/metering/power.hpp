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

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace effbench::metering {

/// Default relative error of the reference wall-plug meter.
inline constexpr double kDefaultMeterErrorFrac = 0.012;

struct PowerSample {
  double t = 0.0;  // seconds since the recording started
  double watts = 0.0;
};

struct PowerTrace {
  std::vector<PowerSample> samples;  // strictly increasing t
  double idle_watts = 0.0;
  double sampling_period_s = 0.0;
  double meter_error_frac = kDefaultMeterErrorFrac;
};

struct EnergyReport {
  double energy_wh = 0.0;
  double co2_g = 0.0;
  double intensity_g_per_kwh = 0.0;
};

/// \brief Whole-machine power source.
///
/// A recording starts at Start() (t = 0). Live meters sample on a background
/// thread while wall time passes; virtual meters (replay, synthetic) are a
/// function of t and produce their samples at Stop().
class PowerMeter {
 public:
  virtual ~PowerMeter() = default;

  virtual std::string Describe() const = 0;
  virtual bool IsLive() const = 0;
  virtual double SamplingPeriod() const = 0;
  virtual double ErrorFrac() const { return kDefaultMeterErrorFrac; }

  virtual void Start() = 0;
  /// Ends the recording; `until_s` is the elapsed recording time the caller
  /// needs covered.
  virtual std::vector<PowerSample> Stop(double until_s) = 0;
};

/// Builds a meter from a JSON spec:
///   {"kind":"replay","path":"trace.csv"}
///   {"kind":"synthetic","shape":"constant","watts":W,"period_s":P}
///   {"kind":"synthetic","shape":"ramp","from":W0,"to":W1,"duration_s":D}
///   {"kind":"synthetic","shape":"square","low":W0,"high":W1,"half_period_s":H}
///   {"kind":"rapl","path":"/sys/class/powercap","period_s":P}
///   {"kind":"none"}
/// The shorthands "replay:<path>", "rapl", "rapl:<path>" and "none" are also
/// accepted as JSON strings. Returns nullptr for "none".
std::unique_ptr<PowerMeter> MakeMeter(const nlohmann::json& spec,
                                      const std::string& base_dir = "");

/// Turns CLI shorthand (or inline JSON) into a meter spec.
nlohmann::json ParseMeterSpec(std::string_view text);

/// Parses a `t_s,watts` CSV replay trace. Throws TraceFormat on bad input.
std::vector<PowerSample> LoadTraceCsv(const std::string& path);
std::vector<PowerSample> ParseTraceCsv(std::string_view text);

/// Median spacing of consecutive samples.
double MedianPeriod(const std::vector<PowerSample>& samples);

/// Records `duration_s` of an idle machine and returns the mean wattage.
/// Throws MeterUnavailable (null meter) or InsufficientSamples (< 5).
double MeasureIdleBaseline(PowerMeter* meter, double duration_s);

/// Trapezoidal integral of max(0, watts - idle) over [start, end], with
/// linear interpolation at the window edges, in watt-hours. Throws
/// TraceCoverage when the samples do not reach the window edges (within one
/// sampling period) and TraceGap when two samples inside the window are more
/// than 5 sampling periods apart.
EnergyReport IntegrateEnergy(const PowerTrace& trace, double start_s,
                             double end_s);

/// grams = energy_wh / 1000 * intensity.
double Co2FromEnergy(double energy_wh, double intensity_g_per_kwh);

}  // namespace effbench::metering
