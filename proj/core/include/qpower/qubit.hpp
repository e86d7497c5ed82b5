#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qpower/handle.hpp"

namespace qpower::qubit {

inline constexpr double kOperatingFrequency = 3.8e9;   // Hz
inline constexpr double kDefaultSensitivity = 1.6e10;  // Hz/V at the operating point

// Flux-tunable transmon biased through a DC source channel:
//   f(V) = f_max * sqrt(|cos(pi (V - v_offset) / v_period)|)
struct QubitModel {
  double f_max = 4.8e9;
  double v_period = 1.0;
  double v_offset = 0.0;
  double t1 = 87.6e-6;
  double t2_ramsey = 5.1e-6;
  double t2_echo = 23.5e-6;
  double echo_stretch = 1.0;

  // Throws DomainError on hard violations; returns soft warnings.
  std::vector<std::string> validate() const;
};

// f_max = 4.8 GHz with v_period chosen so the 3.8 GHz point has
// |df/dV| = 1.6e10 Hz/V.
QubitModel default_qubit_model();

double qubit_frequency(const QubitModel& model, double v_bias);
bool is_degenerate_bias(const QubitModel& model, double v_bias);
// Throws DomainError at cosine zeros.
double bias_sensitivity(const QubitModel& model, double v_bias);
// Bias on the flank above v_offset that tunes the qubit to `frequency`.
double bias_for_frequency(const QubitModel& model, double frequency);

enum class Coherence { kT1, kRamsey, kEcho };

struct CoherenceParams {
  QubitModel model;
  double detuning = 0.0;  // Hz
  double phase = 0.0;     // rad
};

double coherence_population(Coherence kind, double t, const CoherenceParams& params);

struct DecayFit {
  double tau = 0.0;
  double tau_stderr = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
};

// a * exp(-t / tau) + c, seeded by a weighted log-linear regression.
DecayFit fit_decay(std::span<const double> delays, std::span<const double> probs);

struct RamseyFit {
  double fringe = 0.0;
  double t2 = 0.0;
  double phase = 0.0;
  double offset = 0.0;
  double fringe_stderr = 0.0;
  double t2_stderr = 0.0;
};

// 0.5 (1 + exp(-t/T2) cos(2 pi f t + phi)) + offset, seeded from the peak
// of a discrete spectrum. Throws FitError when no fringe stands out.
RamseyFit fit_ramsey(std::span<const double> delays, std::span<const double> probs);

std::vector<double> linspace(double first, double last, std::size_t n);

// Binomial shot sampling; shots == 0 returns the probabilities unchanged.
std::vector<double> sample_shots(std::span<const double> probs, int shots, std::mt19937_64& engine);

struct T2Dispersion {
  bool enabled = true;
  double mean = 4.5e-6;
  double sigma = 0.35e-6;
  double lo = 3.5e-6;
  double hi = 5.5e-6;
};

struct MonitorOptions {
  double duration = 12.0 * 3600.0;
  std::size_t repetitions = 1000;
  int shots = 1000;
  std::uint64_t seed = 1;
  int channel = 1;
  bool accelerate = true;
  double detuning = 250e3;
  std::vector<double> delays = linspace(0.0, 10e-6, 41);
  T2Dispersion dispersion;
  double operating_frequency = kOperatingFrequency;
  std::optional<double> sensitivity;  // Hz/V; default from the flux map
  double bias_fs = 1e3;
  std::size_t bias_samples = 16;
};

struct MonitorResult {
  std::vector<double> timestamps;
  std::vector<double> fringe_freq;
  std::vector<double> t2r;
  std::vector<double> failed_timestamps;
  double operating_bias = 0.0;
  double sensitivity = 0.0;
};

// Repeated Ramsey scans against the bias drift of a twin channel.
MonitorResult run_monitor(InstrumentHandle& twin, const QubitModel& model, const MonitorOptions& opts);

}  // namespace qpower::qubit
