#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpower/handle.hpp"
#include "qpower/trace.hpp"

namespace qpower::metrology {

struct SpectrumEstimate {
  std::vector<double> freqs;  // Hz, from DC upward
  std::vector<double> asd;    // V/sqrt(Hz), one-sided
  double rbw = 0.0;           // Hz, equivalent noise bandwidth of one bin
  std::size_t averages = 0;
};

struct PowerSpectrum {
  std::vector<double> freqs;
  std::vector<double> dbm;
  double rbw = 0.0;
};

struct CrosstalkResult {
  double victim_pkpk = 0.0;
  double kappa_est = 0.0;
  double kappa_stderr = 0.0;
  double residual_rms = 0.0;
  std::vector<double> aggressor_v;
  std::vector<double> victim_v;
};

double peak_to_peak(const Trace& trace);
double rms(const Trace& trace, bool remove_mean);

// Welch estimate: periodic Hann window, 50% overlap, per-segment mean removal,
// one-sided density normalized by window power.
SpectrumEstimate welch_asd(const Trace& trace, std::size_t nperseg);

// Per-bin power into r_load in dBm, with the welch_asd windowing; the bin
// power is PSD * rbw.
PowerSpectrum spectrum_dbm(const Trace& trace, double r_load = 50.0, std::size_t nperseg = 65536);

// Zero-phase 4th-order Butterworth magnitude applied in the frequency domain.
Trace bandlimit(const Trace& trace, double bw);

// Measurement-side floors of the bench instruments, added on top of a
// device-only record ("as measured").
struct ScopeFloor {
  double rms = 80e-6;  // V, white within the scope bandwidth
};
struct AnalyzerFloor {
  double asd = 10e-9;  // V/sqrt(Hz)
};
struct SpectrumAnalyzerFloor {
  double floor_dbm = -110.0;
  double spur_freq = 137e6;
  double spur_dbm = -100.0;
};

Trace add_floor(const Trace& trace, const ScopeFloor& floor, std::uint64_t seed);
Trace add_floor(const Trace& trace, const AnalyzerFloor& floor, std::uint64_t seed);
PowerSpectrum add_floor(const PowerSpectrum& spectrum, const SpectrumAnalyzerFloor& floor);

struct CrosstalkOptions {
  double fs = 10e3;
  std::size_t samples_per_point = 1024;
};

// Sweeps the aggressor from v_start to v_stop in steps of `step` and records
// the averaged victim output at each point.
CrosstalkResult run_crosstalk_protocol(InstrumentHandle& twin, int aggressor, int victim,
                                       double v_start, double v_stop, double step,
                                       const CrosstalkOptions& opts = {});

// {metric, value, unit, config, seed}
struct BenchRecord {
  std::string metric;
  double value = 0.0;
  std::string unit;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const BenchRecord& r);
void from_json(const nlohmann::json& j, BenchRecord& r);

// Least-squares line y = slope * x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double residual_rms = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qpower::metrology
