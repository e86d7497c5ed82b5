#include "qpower/qubit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <thread>

#include "qpower/errors.hpp"
#include "qpower/fit.hpp"
#include "qpower/rng.hpp"

namespace qpower::qubit {

namespace {

constexpr double kPi = std::numbers::pi;

void check_schedule(std::span<const double> delays, std::span<const double> probs, std::size_t min_points) {
  if (delays.size() != probs.size()) throw DomainError("delays and populations differ in length");
  if (delays.size() < min_points) throw DomainError("too few points for the fit");
  for (std::size_t i = 1; i < delays.size(); ++i) {
    if (!(delays[i] > delays[i - 1])) throw DomainError("delays must be strictly increasing");
  }
}

double ramsey_model(double t, std::span<const double> p) {
  // p = {fringe, ln T2, phase, offset}
  return 0.5 * (1.0 + std::exp(-t / std::exp(p[1])) * std::cos(2.0 * kPi * p[0] * t + p[2])) + p[3];
}

double decay_model(double t, std::span<const double> p) {
  // p = {amplitude, ln tau, offset}
  return p[0] * std::exp(-t / std::exp(p[1])) + p[2];
}

double truncated_normal(std::mt19937_64& engine, const T2Dispersion& d) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = d.mean + d.sigma * unit_normal(engine);
    if (x >= d.lo && x <= d.hi) return x;
  }
  return d.mean;
}

}  // namespace

std::vector<std::string> QubitModel::validate() const {
  if (!(f_max > 0.0)) throw DomainError("f_max must be positive");
  if (!(v_period > 0.0)) throw DomainError("v_period must be positive");
  if (!(t1 > 0.0) || !(t2_ramsey > 0.0) || !(t2_echo > 0.0)) {
    throw DomainError("coherence times must be positive");
  }
  if (t2_echo < t2_ramsey) throw DomainError("t2_echo must not be shorter than t2_ramsey");
  std::vector<std::string> warnings;
  if (t1 < t2_ramsey / 2.0) warnings.emplace_back("t1 < t2_ramsey / 2 is unphysical");
  return warnings;
}

QubitModel default_qubit_model() {
  QubitModel model;
  const double x = std::acos(std::pow(kOperatingFrequency / model.f_max, 2));
  model.v_period = model.f_max * kPi * std::sin(x) / (2.0 * std::sqrt(std::cos(x)) * kDefaultSensitivity);
  return model;
}

double qubit_frequency(const QubitModel& model, double v_bias) {
  return model.f_max * std::sqrt(std::abs(std::cos(kPi * (v_bias - model.v_offset) / model.v_period)));
}

bool is_degenerate_bias(const QubitModel& model, double v_bias) {
  return std::abs(std::cos(kPi * (v_bias - model.v_offset) / model.v_period)) < 1e-12;
}

double bias_sensitivity(const QubitModel& model, double v_bias) {
  const double x = kPi * (v_bias - model.v_offset) / model.v_period;
  const double c = std::cos(x);
  if (std::abs(c) < 1e-12) throw DomainError("flux map derivative undefined at a cosine zero");
  // d/dV sqrt|cos x| = -sign(cos x) sin x / (2 sqrt|cos x|) * pi / v_period
  return -model.f_max * std::copysign(1.0, c) * std::sin(x) / (2.0 * std::sqrt(std::abs(c))) * kPi /
         model.v_period;
}

double bias_for_frequency(const QubitModel& model, double frequency) {
  if (!(frequency > 0.0 && frequency <= model.f_max)) {
    throw DomainError("target frequency must lie in (0, f_max]");
  }
  return model.v_offset + std::acos(std::pow(frequency / model.f_max, 2)) * model.v_period / kPi;
}

double coherence_population(Coherence kind, double t, const CoherenceParams& params) {
  if (!(t >= 0.0)) throw DomainError("delay must be non-negative");
  const auto& m = params.model;
  switch (kind) {
    case Coherence::kT1:
      return std::exp(-t / m.t1);
    case Coherence::kRamsey:
      return 0.5 * (1.0 + std::exp(-t / m.t2_ramsey) *
                              std::cos(2.0 * kPi * params.detuning * t + params.phase));
    case Coherence::kEcho:
      return 0.5 * (1.0 + std::exp(-std::pow(t / m.t2_echo, m.echo_stretch)));
  }
  return 0.0;
}

DecayFit fit_decay(std::span<const double> delays, std::span<const double> probs) {
  check_schedule(delays, probs, 5);
  const auto [lo_it, hi_it] = std::minmax_element(probs.begin(), probs.end());
  const double range = *hi_it - *lo_it;
  if (!(range > 1e-12)) throw FitError("constant data carries no decay");

  // Weighted regression of ln(p - c0) on t, weights (p - c0)^2.
  const double c0 = *lo_it - 0.02 * range;
  double sw = 0, swt = 0, swy = 0, swtt = 0, swty = 0;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double d = probs[i] - c0;
    const double w = d * d;
    const double y = std::log(d);
    sw += w;
    swt += w * delays[i];
    swy += w * y;
    swtt += w * delays[i] * delays[i];
    swty += w * delays[i] * y;
  }
  const double denom = sw * swtt - swt * swt;
  const double slope = denom != 0.0 ? (sw * swty - swt * swy) / denom : 0.0;
  if (!(slope < 0.0)) throw FitError("data does not decay");
  const double intercept = (swy - slope * swt) / sw;

  const double span = delays.back() - delays.front();
  const auto result = fit::levenberg_marquardt(decay_model, delays, probs,
                                               {std::exp(intercept), std::log(-1.0 / slope), c0});
  const double tau = std::exp(result.params[1]);
  if (!std::isfinite(tau) || !(tau > 0.0) || tau > 1e3 * span || !(result.params[0] > 0.0)) {
    throw FitError("decay fit did not converge to a finite time constant");
  }
  return {tau, tau * result.std_errors[1], result.params[0], result.params[2]};
}

RamseyFit fit_ramsey(std::span<const double> delays, std::span<const double> probs) {
  check_schedule(delays, probs, 10);
  const double mean = std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
  double var = 0.0;
  for (double p : probs) var += (p - mean) * (p - mean);
  if (!(var > 1e-18)) throw FitError("constant data carries no fringe");

  const double span = delays.back() - delays.front();
  std::vector<double> steps(delays.size() - 1);
  for (std::size_t i = 1; i < delays.size(); ++i) steps[i - 1] = delays[i] - delays[i - 1];
  std::nth_element(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2), steps.end());
  const double nyquist = 0.5 / steps[steps.size() / 2];

  // Discrete spectrum on an 8x oversampled grid.
  const double df = 1.0 / (8.0 * span);
  const auto bins = static_cast<std::size_t>(nyquist / df);
  std::vector<double> power(bins + 1);
  std::vector<std::complex<double>> coeff(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    const double f = static_cast<double>(k) * df;
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < delays.size(); ++i) {
      acc += (probs[i] - mean) * std::polar(1.0, -2.0 * kPi * f * delays[i]);
    }
    coeff[k] = acc;
    power[k] = std::norm(acc);
  }
  const auto peak = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
  const double f_peak = static_cast<double>(peak) * df;
  std::vector<double> sorted = power;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (f_peak < 1.0 / span) throw FitError("fringe frequency not identifiable (below one period per scan)");
  if (!(power[peak] > 20.0 * median)) throw FitError("no fringe above the noise floor");

  const double phase0 = std::arg(coeff[peak]);
  const double offset0 = mean - 0.5;
  fit::LeastSquaresResult best;
  bool have_best = false;
  for (const double t2_guess : {span / 4.0, span / 2.0, span}) {
    try {
      auto r = fit::levenberg_marquardt(ramsey_model, delays, probs,
                                        {f_peak, std::log(t2_guess), phase0, offset0});
      if (!have_best || r.ssr < best.ssr) {
        best = std::move(r);
        have_best = true;
      }
    } catch (const FitError&) {
    }
  }
  if (!have_best) throw FitError("Ramsey fit failed from every start");
  const double fringe = best.params[0];
  const double t2 = std::exp(best.params[1]);
  if (!std::isfinite(fringe) || !(fringe > 0.0) || !std::isfinite(t2) || !(t2 > 0.0) || t2 > 100.0 * span) {
    throw FitError("Ramsey fit left the physical region");
  }
  return {fringe, t2, best.params[2], best.params[3], best.std_errors[0], t2 * best.std_errors[1]};
}

std::vector<double> linspace(double first, double last, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = first;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = first + (last - first) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

std::vector<double> sample_shots(std::span<const double> probs, int shots, std::mt19937_64& engine) {
  std::vector<double> out(probs.begin(), probs.end());
  if (shots <= 0) return out;
  for (double& p : out) {
    std::binomial_distribution<int> draw(shots, std::clamp(p, 0.0, 1.0));
    p = static_cast<double>(draw(engine)) / shots;
  }
  return out;
}

MonitorResult run_monitor(InstrumentHandle& twin, const QubitModel& model, const MonitorOptions& opts) {
  model.validate();
  if (opts.repetitions < 2) throw DomainError("monitor needs at least two repetitions");
  if (!(opts.duration > 0.0)) throw DomainError("monitor duration must be positive");

  MonitorResult result;
  result.operating_bias = bias_for_frequency(model, opts.operating_frequency);
  remote::set_voltage(twin, opts.channel, result.operating_bias);
  const double v_nominal = remote::get_voltage(twin, opts.channel);
  result.sensitivity = opts.sensitivity.value_or(bias_sensitivity(model, v_nominal));

  auto shots_engine = make_engine(opts.seed, stream::kShots);
  auto dispersion_engine = make_engine(opts.seed, stream::kDispersion);
  const double interval = opts.duration / static_cast<double>(opts.repetitions - 1);

  for (std::size_t rep = 0; rep < opts.repetitions; ++rep) {
    if (rep > 0) {
      if (opts.accelerate) {
        remote::advance(twin, interval);
      } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(interval));
      }
    }
    const double timestamp = interval * static_cast<double>(rep);
    const double bias = remote::measure(twin, opts.channel, opts.bias_fs, opts.bias_samples).mean();

    CoherenceParams params{model, opts.detuning + result.sensitivity * (bias - v_nominal), 0.0};
    if (opts.dispersion.enabled) params.model.t2_ramsey = truncated_normal(dispersion_engine, opts.dispersion);
    std::vector<double> ideal(opts.delays.size());
    for (std::size_t i = 0; i < ideal.size(); ++i) {
      ideal[i] = coherence_population(Coherence::kRamsey, opts.delays[i], params);
    }
    const auto measured = sample_shots(ideal, opts.shots, shots_engine);
    try {
      const auto fit = fit_ramsey(opts.delays, measured);
      result.timestamps.push_back(timestamp);
      result.fringe_freq.push_back(fit.fringe);
      result.t2r.push_back(fit.t2);
    } catch (const FitError&) {
      result.failed_timestamps.push_back(timestamp);
    }
  }
  return result;
}

}  // namespace qpower::qubit
