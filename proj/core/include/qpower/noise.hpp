#pragma once

#include <cstdint>
#include <vector>

#include "qpower/trace.hpp"

namespace qpower::noise {

struct WhiteSegment {
  double f_lo = 0.0;  // Hz, inclusive
  double f_hi = 0.0;  // Hz, exclusive except for the last segment
  double asd = 0.0;   // V/sqrt(Hz)
};

struct Spur {
  double freq = 0.0;       // Hz
  double amplitude = 0.0;  // V peak
};

// One-sided output noise model:
//   S(f) = asd_segment(f)^2 + flicker_coeff^2 / f   [V^2/Hz]
// plus discrete spectral lines. Segments are contiguous and sorted; S is zero
// outside their union apart from the flicker term.
struct AsdModel {
  std::vector<WhiteSegment> white_segments;
  double flicker_coeff = 0.0;  // V
  std::vector<Spur> spurs;

  void validate() const;
  double psd(double f) const;
  double asd(double f) const;
  // Integral of S(f) over [f_lo, f_hi], excluding spurs.
  double band_power(double f_lo, double f_hi) const;
  // Same model with `extra_asd` added in quadrature to every white segment.
  AsdModel with_added_white(double extra_asd) const;
  double upper_band_edge() const;
};

// Slow drift as an Ornstein-Uhlenbeck process.
struct DriftModel {
  double sigma = 0.7e-6;  // V, stationary standard deviation
  double tau = 3600.0;    // s, correlation time

  void validate() const;
};

struct CrosstalkModel {
  double kappa = 0.214e-6;

  void validate() const;
};

// 20 nV/sqrt(Hz) below 100 kHz, 12 nV/sqrt(Hz) up to 25 MHz, and a 1/f rise
// reaching 10x the floor at 10 Hz.
AsdModel default_output_noise();

// Spurs at -100 dBm into 50 ohm, used to exercise the HF spectrum bench.
std::vector<Spur> example_spur_table();

Trace synthesize_noise(const AsdModel& model, double fs, std::size_t n, std::uint64_t seed);

// Exact OU update over an interval dt given a unit normal draw.
double ou_advance(const DriftModel& model, double x, double dt, double unit_normal);

Trace synthesize_drift(const DriftModel& model, double duration, double dt, std::uint64_t seed);

double crosstalk_delta(const CrosstalkModel& model, double aggressor_change);

}  // namespace qpower::noise
