#include "qpower/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "qpower/errors.hpp"
#include "qpower/fft.hpp"
#include "qpower/noise.hpp"
#include "qpower/rng.hpp"

namespace qpower::metrology {

namespace {

std::vector<double> hann_periodic(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

struct WelchPsd {
  std::vector<double> freqs;
  std::vector<double> psd;
  double rbw = 0.0;
  std::size_t averages = 0;
};

WelchPsd welch_psd(const Trace& trace, std::size_t nperseg) {
  trace.validate();
  if (nperseg < 8) throw DomainError("welch needs nperseg >= 8");
  if (nperseg > trace.size()) throw DomainError("welch nperseg exceeds trace length");

  const auto window = hann_periodic(nperseg);
  const double sum_w = std::accumulate(window.begin(), window.end(), 0.0);
  const double sum_w2 = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);
  const std::size_t hop = nperseg / 2;
  const std::size_t segments = 1 + (trace.size() - nperseg) / hop;
  const std::size_t bins = nperseg / 2 + 1;

  std::vector<double> acc(bins, 0.0);
  std::vector<double> segment(nperseg);
  for (std::size_t s = 0; s < segments; ++s) {
    const auto first = trace.samples.begin() + static_cast<std::ptrdiff_t>(s * hop);
    const double mean = std::accumulate(first, first + static_cast<std::ptrdiff_t>(nperseg), 0.0) /
                        static_cast<double>(nperseg);
    for (std::size_t i = 0; i < nperseg; ++i) segment[i] = (first[static_cast<std::ptrdiff_t>(i)] - mean) * window[i];
    const auto spectrum = fft::rfft(segment);
    for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spectrum[k]);
  }

  WelchPsd out;
  out.averages = segments;
  out.rbw = trace.fs * sum_w2 / (sum_w * sum_w);
  out.freqs.resize(bins);
  out.psd.resize(bins);
  const double scale = 1.0 / (trace.fs * sum_w2 * static_cast<double>(segments));
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = k == 0 || (nperseg % 2 == 0 && k == bins - 1);
    out.freqs[k] = static_cast<double>(k) * trace.fs / static_cast<double>(nperseg);
    out.psd[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

double watts_to_dbm(double watts) {
  constexpr double kFloorDbm = -400.0;
  return watts > 0.0 ? 10.0 * std::log10(watts / 1e-3) : kFloorDbm;
}

}  // namespace

double peak_to_peak(const Trace& trace) {
  if (trace.size() < 2) throw DomainError("peak-to-peak needs at least two samples");
  const auto [lo, hi] = std::minmax_element(trace.samples.begin(), trace.samples.end());
  return *hi - *lo;
}

double rms(const Trace& trace, bool remove_mean) {
  trace.validate();
  const double mean = remove_mean ? trace.mean() : 0.0;
  double acc = 0.0;
  for (double v : trace.samples) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(trace.size()));
}

SpectrumEstimate welch_asd(const Trace& trace, std::size_t nperseg) {
  auto psd = welch_psd(trace, nperseg);
  SpectrumEstimate out{std::move(psd.freqs), std::move(psd.psd), psd.rbw, psd.averages};
  for (double& v : out.asd) v = std::sqrt(v);
  return out;
}

PowerSpectrum spectrum_dbm(const Trace& trace, double r_load, std::size_t nperseg) {
  if (!(r_load > 0.0)) throw DomainError("load resistance must be positive");
  const auto psd = welch_psd(trace, std::min(nperseg, trace.size()));
  PowerSpectrum out{psd.freqs, std::vector<double>(psd.psd.size()), psd.rbw};
  for (std::size_t k = 0; k < psd.psd.size(); ++k) {
    out.dbm[k] = watts_to_dbm(psd.psd[k] * psd.rbw / r_load);
  }
  return out;
}

Trace bandlimit(const Trace& trace, double bw) {
  trace.validate();
  if (!(bw > 0.0) || !(bw < trace.fs / 2.0)) throw DomainError("bandlimit needs 0 < bw < fs/2");
  auto spectrum = fft::rfft(trace.samples);
  const double df = trace.fs / static_cast<double>(trace.size());
  for (std::size_t k = 1; k < spectrum.size(); ++k) {
    const double x = static_cast<double>(k) * df / bw;
    const double x2 = x * x;
    spectrum[k] /= std::sqrt(1.0 + x2 * x2 * x2 * x2);
  }
  return Trace{trace.fs, trace.t0, fft::irfft(spectrum, trace.size())};
}

Trace add_floor(const Trace& trace, const ScopeFloor& floor, std::uint64_t seed) {
  trace.validate();
  auto engine = make_engine(seed, stream::kFloor, 1);
  Trace out = trace;
  for (double& v : out.samples) v += floor.rms * unit_normal(engine);
  return out;
}

Trace add_floor(const Trace& trace, const AnalyzerFloor& floor, std::uint64_t seed) {
  trace.validate();
  const noise::AsdModel white{{{0.0, trace.fs / 2.0, floor.asd}}, 0.0, {}};
  const auto extra = noise::synthesize_noise(white, trace.fs, trace.size(),
                                             make_engine(seed, stream::kFloor, 2)());
  Trace out = trace;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += extra.samples[i];
  return out;
}

PowerSpectrum add_floor(const PowerSpectrum& spectrum, const SpectrumAnalyzerFloor& floor) {
  PowerSpectrum out = spectrum;
  const double floor_w = 1e-3 * std::pow(10.0, floor.floor_dbm / 10.0);
  const double spur_w = 1e-3 * std::pow(10.0, floor.spur_dbm / 10.0);
  std::size_t spur_bin = out.freqs.size();
  if (out.freqs.size() > 1) {
    const double df = out.freqs[1] - out.freqs[0];
    const auto k = static_cast<std::size_t>(std::llround(floor.spur_freq / df));
    if (k > 0 && k < out.freqs.size()) spur_bin = k;
  }
  for (std::size_t k = 0; k < out.dbm.size(); ++k) {
    double w = out.dbm[k] <= -400.0 ? 0.0 : 1e-3 * std::pow(10.0, out.dbm[k] / 10.0);
    w += floor_w;
    if (k == spur_bin) w += spur_w;
    out.dbm[k] = watts_to_dbm(w);
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("line fit needs >= 2 paired points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("line fit needs distinct abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ssr += r * r;
  }
  fit.residual_rms = std::sqrt(ssr / n);
  fit.slope_stderr = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  return fit;
}

CrosstalkResult run_crosstalk_protocol(InstrumentHandle& twin, int aggressor, int victim,
                                       double v_start, double v_stop, double step,
                                       const CrosstalkOptions& opts) {
  if (aggressor == victim) throw DomainError("aggressor and victim must differ");
  if (!(step > 0.0)) throw DomainError("sweep step must be positive");
  if (opts.samples_per_point < 2) throw DomainError("need at least two samples per point");

  const double direction = v_stop >= v_start ? 1.0 : -1.0;
  const auto points = static_cast<std::size_t>(std::floor(std::abs(v_stop - v_start) / step + 1e-9)) + 1;

  CrosstalkResult result;
  for (std::size_t i = 0; i < points; ++i) {
    const double target = v_start + direction * step * static_cast<double>(i);
    const double applied = remote::set_voltage(twin, aggressor, target);
    const auto trace = remote::measure(twin, victim, opts.fs, opts.samples_per_point);
    result.aggressor_v.push_back(applied);
    result.victim_v.push_back(trace.mean());
  }
  const auto [lo, hi] = std::minmax_element(result.victim_v.begin(), result.victim_v.end());
  result.victim_pkpk = *hi - *lo;
  if (points >= 2) {
    const auto line = fit_line(result.aggressor_v, result.victim_v);
    result.kappa_est = line.slope;
    result.kappa_stderr = line.slope_stderr;
    result.residual_rms = line.residual_rms;
  }
  return result;
}

void to_json(nlohmann::json& j, const BenchRecord& r) {
  j = nlohmann::json{{"metric", r.metric}, {"value", r.value}, {"unit", r.unit},
                     {"config", r.config}, {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, BenchRecord& r) {
  j.at("metric").get_to(r.metric);
  j.at("value").get_to(r.value);
  j.at("unit").get_to(r.unit);
  r.config = j.value("config", nlohmann::json::object());
  j.at("seed").get_to(r.seed);
}

}  // namespace qpower::metrology
