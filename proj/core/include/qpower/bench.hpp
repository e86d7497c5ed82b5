#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpower/handle.hpp"
#include "qpower/metrology.hpp"
#include "qpower/trace.hpp"

// The six bench pipelines, each driving a twin through an InstrumentHandle.
namespace qpower::bench {

enum class Pipeline { kRipple, kRms, kLfNoise, kHfNoise, kDrift, kCrosstalk };

std::string_view to_string(Pipeline p);
std::optional<Pipeline> parse_pipeline(std::string_view name);

// Two-column table: a spectrum, an rms curve or a sweep.
struct Series {
  std::string x_name;
  std::string y_name;
  std::vector<double> x;
  std::vector<double> y;
};

struct BenchResult {
  std::vector<metrology::BenchRecord> records;
  std::optional<Trace> trace;
  std::optional<Series> series;
};

struct RippleOptions {
  int channel = 1;
  std::optional<double> setpoint;  // unset: measure the present setpoint
  double fs = 50e6;
  std::size_t n = 50000;
  double bandwidth = 20e6;
  bool as_measured = false;
};

struct RmsOptions {
  int channel = 1;
  std::vector<double> setpoints{0.0, 0.5, 1.0, 3.0, 5.0, 7.0};
  double fs = 50e6;
  std::size_t n = std::size_t{1} << 18;
  double bandwidth = 20e6;
  bool as_measured = true;
};

struct LfNoiseOptions {
  int channel = 1;
  double fs = 1e6;
  std::size_t n = std::size_t{1} << 20;
  std::size_t nperseg = std::size_t{1} << 15;
  double probe = 10e3;
  double probe_halfwidth = 500.0;  // PSD is averaged over probe +- halfwidth
  bool as_measured = false;
};

struct HfNoiseOptions {
  int channel = 1;
  double fs = 500e6;
  std::size_t n = std::size_t{1} << 20;
  std::size_t nperseg = 65536;
  double f_lo = 9e3;
  double f_hi = 200e6;
  double r_load = 50.0;
  bool as_measured = false;
};

struct DriftOptions {
  int channel = 1;
  std::optional<double> setpoint;
  double duration = 12.0 * 3600.0;
  double interval = 10.0;
  bool accelerate = true;
  double fs = 1e3;
  std::size_t samples = 16;
};

struct CrosstalkOptions {
  int aggressor = 1;
  int victim = 2;
  double v_start = -7.0;
  double v_stop = 7.0;
  double step = 0.5;
  metrology::CrosstalkOptions protocol;
};

// `seed` labels the records and drives the measurement-floor layers.
BenchResult ripple(InstrumentHandle& twin, const RippleOptions& opts, std::uint64_t seed);
BenchResult rms(InstrumentHandle& twin, const RmsOptions& opts, std::uint64_t seed);
BenchResult lf_noise(InstrumentHandle& twin, const LfNoiseOptions& opts, std::uint64_t seed);
BenchResult hf_noise(InstrumentHandle& twin, const HfNoiseOptions& opts, std::uint64_t seed);
BenchResult drift(InstrumentHandle& twin, const DriftOptions& opts, std::uint64_t seed);
BenchResult crosstalk(InstrumentHandle& twin, const CrosstalkOptions& opts, std::uint64_t seed);

}  // namespace qpower::bench
