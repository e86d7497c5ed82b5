#include "qpower/noise.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "qpower/errors.hpp"
#include "qpower/fft.hpp"
#include "qpower/rng.hpp"

namespace qpower::noise {

void AsdModel::validate() const {
  if (!(flicker_coeff >= 0.0)) throw DomainError("flicker coefficient must be non-negative");
  for (std::size_t i = 0; i < white_segments.size(); ++i) {
    const auto& s = white_segments[i];
    if (!(s.f_lo >= 0.0) || !(s.f_hi > s.f_lo) || !(s.asd >= 0.0)) {
      throw DomainError("white segment needs 0 <= f_lo < f_hi and asd >= 0");
    }
    if (i > 0 && s.f_lo != white_segments[i - 1].f_hi) {
      throw DomainError("white segments must be sorted, contiguous and non-overlapping");
    }
  }
  for (const auto& spur : spurs) {
    if (!(spur.freq > 0.0) || !(spur.amplitude >= 0.0)) {
      throw DomainError("spur needs freq > 0 and amplitude >= 0");
    }
  }
}

double AsdModel::psd(double f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < white_segments.size(); ++i) {
    const auto& seg = white_segments[i];
    const bool last = i + 1 == white_segments.size();
    if (f >= seg.f_lo && (f < seg.f_hi || (last && f == seg.f_hi))) {
      s += seg.asd * seg.asd;
      break;
    }
  }
  if (f > 0.0) s += flicker_coeff * flicker_coeff / f;
  return s;
}

double AsdModel::asd(double f) const { return std::sqrt(psd(f)); }

double AsdModel::band_power(double f_lo, double f_hi) const {
  if (!(f_hi > f_lo)) return 0.0;
  double p = 0.0;
  for (const auto& seg : white_segments) {
    const double lo = std::max(f_lo, seg.f_lo);
    const double hi = std::min(f_hi, seg.f_hi);
    if (hi > lo) p += seg.asd * seg.asd * (hi - lo);
  }
  if (f_lo > 0.0) p += flicker_coeff * flicker_coeff * std::log(f_hi / f_lo);
  return p;
}

AsdModel AsdModel::with_added_white(double extra_asd) const {
  AsdModel out = *this;
  for (auto& seg : out.white_segments) seg.asd = std::hypot(seg.asd, extra_asd);
  return out;
}

double AsdModel::upper_band_edge() const {
  return white_segments.empty() ? 0.0 : white_segments.back().f_hi;
}

void DriftModel::validate() const {
  if (!(sigma >= 0.0)) throw DomainError("drift sigma must be non-negative");
  if (!(tau > 0.0)) throw DomainError("drift tau must be positive");
}

void CrosstalkModel::validate() const {
  if (!(std::abs(kappa) < 1e-3)) throw DomainError("crosstalk |kappa| must be below 1e-3");
}

AsdModel default_output_noise() {
  constexpr double kLowFloor = 20e-9;
  constexpr double kHighFloor = 12e-9;
  // S(10 Hz) = (10 * kLowFloor)^2  =>  c^2 / 10 + kLowFloor^2 = 100 kLowFloor^2
  const double flicker = std::sqrt(10.0 * 99.0 * kLowFloor * kLowFloor);
  return AsdModel{{{0.0, 100e3, kLowFloor}, {100e3, 25e6, kHighFloor}}, flicker, {}};
}

std::vector<Spur> example_spur_table() {
  // -100 dBm into 50 ohm: Vrms = sqrt(1e-13 W * 50 ohm)
  const double peak = std::sqrt(1e-13 * 50.0) * std::numbers::sqrt2;
  return {{1.0e6, peak}, {12.5e6, peak}, {60.0e6, peak}};
}

Trace synthesize_noise(const AsdModel& model, double fs, std::size_t n, std::uint64_t seed) {
  model.validate();
  if (n < 2) throw DomainError("noise synthesis needs n >= 2");
  if (!(fs > 0.0)) throw DomainError("sample rate must be positive");

  const std::size_t bins = n / 2 + 1;
  const double df = fs / static_cast<double>(n);
  const double nd = static_cast<double>(n);
  const bool has_nyquist = n % 2 == 0;
  auto engine = make_engine(seed, stream::kNoisePhase);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  std::vector<std::complex<double>> spectrum(bins);
  for (std::size_t k = 1; k < bins; ++k) {
    const double phi = phase(engine);
    if (has_nyquist && k == bins - 1) continue;
    const double s = model.psd(static_cast<double>(k) * df);
    // Random-phase bin with deterministic amplitude: sum over bins of
    // 2|X_k|^2 / n^2 equals sum of S(f_k) df.
    spectrum[k] = std::polar(std::sqrt(s * fs * nd / 2.0), phi);
  }
  for (const auto& spur : model.spurs) {
    const double phi = phase(engine);
    const auto k = static_cast<std::size_t>(std::llround(spur.freq / df));
    if (k == 0 || k >= bins || (has_nyquist && k == bins - 1)) continue;
    spectrum[k] += std::polar(spur.amplitude * nd / 2.0, phi);
  }
  return Trace{fs, 0.0, fft::irfft(spectrum, n)};
}

double ou_advance(const DriftModel& model, double x, double dt, double unit_normal) {
  const double decay = std::exp(-dt / model.tau);
  return x * decay + model.sigma * std::sqrt(-std::expm1(-2.0 * dt / model.tau)) * unit_normal;
}

Trace synthesize_drift(const DriftModel& model, double duration, double dt, std::uint64_t seed) {
  model.validate();
  if (!(dt > 0.0)) throw DomainError("drift step must be positive");
  if (!(duration >= dt)) throw DomainError("drift duration must be at least one step");
  const auto n = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;

  auto engine = make_engine(seed, stream::kDrift);
  Trace trace{1.0 / dt, 0.0, {}};
  trace.samples.reserve(n);
  double x = model.sigma * unit_normal(engine);
  trace.samples.push_back(x);
  for (std::size_t k = 1; k < n; ++k) {
    x = ou_advance(model, x, dt, unit_normal(engine));
    trace.samples.push_back(x);
  }
  return trace;
}

double crosstalk_delta(const CrosstalkModel& model, double aggressor_change) {
  return model.kappa * aggressor_change;
}

}  // namespace qpower::noise
