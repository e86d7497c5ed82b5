#include "qpower/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "qpower/errors.hpp"
#include "qpower/rng.hpp"

namespace qpower::bench {

namespace {

using metrology::BenchRecord;
using nlohmann::json;

constexpr std::uint64_t kScopeStream = 0x73636f7065ULL;
constexpr std::uint64_t kAnalyzerStream = 0x616e616c79ULL;

std::uint64_t floor_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return make_engine(seed, stream, index)();
}

}  // namespace

std::string_view to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kRipple: return "ripple";
    case Pipeline::kRms: return "rms";
    case Pipeline::kLfNoise: return "lfnoise";
    case Pipeline::kHfNoise: return "hfnoise";
    case Pipeline::kDrift: return "drift";
    case Pipeline::kCrosstalk: return "crosstalk";
  }
  return "";
}

std::optional<Pipeline> parse_pipeline(std::string_view name) {
  for (auto p : {Pipeline::kRipple, Pipeline::kRms, Pipeline::kLfNoise, Pipeline::kHfNoise,
                 Pipeline::kDrift, Pipeline::kCrosstalk}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

BenchResult ripple(InstrumentHandle& twin, const RippleOptions& opts, std::uint64_t seed) {
  const double applied = opts.setpoint ? remote::set_voltage(twin, opts.channel, *opts.setpoint)
                                       : remote::get_voltage(twin, opts.channel);
  Trace trace = metrology::bandlimit(remote::measure(twin, opts.channel, opts.fs, opts.n), opts.bandwidth);
  if (opts.as_measured) trace = metrology::add_floor(trace, metrology::ScopeFloor{}, floor_seed(seed, kScopeStream, 0));

  BenchResult out;
  out.records.push_back({"ripple_pkpk", metrology::peak_to_peak(trace), "V",
                         json{{"channel", opts.channel}, {"setpoint_v", applied}, {"fs_hz", opts.fs},
                              {"samples", opts.n}, {"bandwidth_hz", opts.bandwidth},
                              {"as_measured", opts.as_measured}},
                         seed});
  out.trace = std::move(trace);
  return out;
}

BenchResult rms(InstrumentHandle& twin, const RmsOptions& opts, std::uint64_t seed) {
  BenchResult out;
  Series curve{"setpoint_v", "rms_v", {}, {}};
  for (std::size_t i = 0; i < opts.setpoints.size(); ++i) {
    const double applied = remote::set_voltage(twin, opts.channel, opts.setpoints[i]);
    Trace trace = metrology::bandlimit(remote::measure(twin, opts.channel, opts.fs, opts.n), opts.bandwidth);
    if (opts.as_measured) {
      trace = metrology::add_floor(trace, metrology::ScopeFloor{}, floor_seed(seed, kScopeStream, i));
    }
    const double value = metrology::rms(trace, true);
    out.records.push_back({"rms", value, "V",
                           json{{"channel", opts.channel}, {"setpoint_v", applied}, {"fs_hz", opts.fs},
                                {"samples", opts.n}, {"bandwidth_hz", opts.bandwidth},
                                {"as_measured", opts.as_measured}},
                           seed});
    curve.x.push_back(applied);
    curve.y.push_back(value);
    if (i + 1 == opts.setpoints.size()) out.trace = std::move(trace);
  }
  out.series = std::move(curve);
  return out;
}

BenchResult lf_noise(InstrumentHandle& twin, const LfNoiseOptions& opts, std::uint64_t seed) {
  Trace trace = remote::measure(twin, opts.channel, opts.fs, opts.n);
  if (opts.as_measured) {
    trace = metrology::add_floor(trace, metrology::AnalyzerFloor{}, floor_seed(seed, kAnalyzerStream, 0));
  }
  const auto est = metrology::welch_asd(trace, opts.nperseg);

  double power = 0.0;
  std::size_t bins = 0;
  for (std::size_t k = 0; k < est.freqs.size(); ++k) {
    if (std::abs(est.freqs[k] - opts.probe) <= opts.probe_halfwidth) {
      power += est.asd[k] * est.asd[k];
      ++bins;
    }
  }
  if (bins == 0) throw DomainError("no spectral bin near the probe frequency");

  BenchResult out;
  out.records.push_back({"asd", std::sqrt(power / static_cast<double>(bins)), "V/sqrt(Hz)",
                         json{{"channel", opts.channel}, {"probe_hz", opts.probe},
                              {"probe_halfwidth_hz", opts.probe_halfwidth}, {"fs_hz", opts.fs},
                              {"samples", opts.n}, {"nperseg", opts.nperseg}, {"averages", est.averages},
                              {"rbw_hz", est.rbw}, {"as_measured", opts.as_measured}},
                         seed});
  out.series = Series{"f_hz", "asd_v_per_rthz", est.freqs, est.asd};
  out.trace = std::move(trace);
  return out;
}

BenchResult hf_noise(InstrumentHandle& twin, const HfNoiseOptions& opts, std::uint64_t seed) {
  const Trace trace = remote::measure(twin, opts.channel, opts.fs, opts.n);
  auto spectrum = metrology::spectrum_dbm(trace, opts.r_load, opts.nperseg);
  if (opts.as_measured) spectrum = metrology::add_floor(spectrum, metrology::SpectrumAnalyzerFloor{});

  Series band{"f_hz", "power_dbm", {}, {}};
  for (std::size_t k = 0; k < spectrum.freqs.size(); ++k) {
    if (spectrum.freqs[k] >= opts.f_lo && spectrum.freqs[k] <= opts.f_hi) {
      band.x.push_back(spectrum.freqs[k]);
      band.y.push_back(spectrum.dbm[k]);
    }
  }
  if (band.y.empty()) throw DomainError("no spectral bin inside the analysis band");
  const auto peak = std::max_element(band.y.begin(), band.y.end()) - band.y.begin();

  BenchResult out;
  out.records.push_back({"max_bin_power", band.y[static_cast<std::size_t>(peak)], "dBm",
                         json{{"channel", opts.channel}, {"peak_hz", band.x[static_cast<std::size_t>(peak)]},
                              {"f_lo_hz", opts.f_lo}, {"f_hi_hz", opts.f_hi}, {"fs_hz", opts.fs},
                              {"samples", opts.n}, {"nperseg", opts.nperseg}, {"rbw_hz", spectrum.rbw},
                              {"r_load_ohm", opts.r_load}, {"as_measured", opts.as_measured}},
                         seed});
  out.series = std::move(band);
  return out;
}

BenchResult drift(InstrumentHandle& twin, const DriftOptions& opts, std::uint64_t seed) {
  if (!(opts.interval > 0.0) || opts.duration < opts.interval) {
    throw DomainError("drift needs interval > 0 and duration >= interval");
  }
  const double applied = opts.setpoint ? remote::set_voltage(twin, opts.channel, *opts.setpoint)
                                       : remote::get_voltage(twin, opts.channel);
  const auto steps = static_cast<std::size_t>(std::floor(opts.duration / opts.interval + 1e-9));

  Trace readings{1.0 / opts.interval, 0.0, {}};
  readings.samples.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    if (k > 0) {
      if (opts.accelerate) {
        remote::advance(twin, opts.interval);
      } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(opts.interval));
      }
    }
    readings.samples.push_back(remote::measure(twin, opts.channel, opts.fs, opts.samples).mean() - applied);
  }

  BenchResult out;
  out.records.push_back({"drift_pkpk", metrology::peak_to_peak(readings), "V",
                         json{{"channel", opts.channel}, {"setpoint_v", applied}, {"duration_s", opts.duration},
                              {"interval_s", opts.interval}, {"accelerate", opts.accelerate}},
                         seed});
  out.trace = std::move(readings);
  return out;
}

BenchResult crosstalk(InstrumentHandle& twin, const CrosstalkOptions& opts, std::uint64_t seed) {
  const auto result = metrology::run_crosstalk_protocol(twin, opts.aggressor, opts.victim, opts.v_start,
                                                        opts.v_stop, opts.step, opts.protocol);
  const json config{{"aggressor", opts.aggressor}, {"victim", opts.victim}, {"v_start", opts.v_start},
                    {"v_stop", opts.v_stop}, {"step", opts.step},
                    {"samples_per_point", opts.protocol.samples_per_point}};
  BenchResult out;
  out.records.push_back({"victim_pkpk", result.victim_pkpk, "V", config, seed});
  out.records.push_back({"kappa_est", result.kappa_est, "1", config, seed});
  out.records.push_back({"kappa_stderr", result.kappa_stderr, "1", config, seed});
  out.records.push_back({"residual_rms", result.residual_rms, "V", config, seed});

  out.series = Series{"aggressor_v", "victim_v", result.aggressor_v, result.victim_v};
  return out;
}

}  // namespace qpower::bench
