#include "qpower/analog_chain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "qpower/errors.hpp"

namespace qpower::analog {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double corner_db(double ratio) { return 10.0 * std::log1p(ratio * ratio) / std::numbers::ln10; }

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

double magnitude_db(const PoleZeroGain& tf, Hz f) { return response(tf, f).magnitude_db; }

// Residual of the compensated loop against the targets, normalized by the
// tuner tolerances. Empty when the loop has no unity crossing.
struct Residual {
  double pm = 0.0;
  double ugbw = 0.0;
  double norm() const { return std::hypot(pm, ugbw); }
};

class CompensationProblem {
 public:
  CompensationProblem(const PoleZeroGain& tf, double pm_target, Hz ugbw_target,
                      const TuneOptions& opts)
      : tf_(tf), pm_target_(pm_target), ugbw_target_(ugbw_target), opts_(opts) {}

  std::optional<Residual> evaluate(double log_zero, double log_pole) const {
    const CompensationParams comp{std::exp(log_zero), std::exp(log_pole)};
    try {
      const auto report = stability_report(apply_compensation(tf_, comp));
      return Residual{(report.phase_margin_deg - pm_target_) / opts_.pm_tolerance_deg,
                      (report.ugbw / ugbw_target_ - 1.0) / opts_.ugbw_rel_tolerance};
    } catch (const NotApplicableError&) {
      return std::nullopt;
    }
  }

  bool in_box(double log_zero, double log_pole) const {
    return log_zero >= lo() && log_pole <= hi() && log_zero <= log_pole;
  }

  double lo() const { return std::log(opts_.box_lo); }
  double hi() const { return std::log(opts_.box_hi); }

 private:
  const PoleZeroGain& tf_;
  double pm_target_;
  Hz ugbw_target_;
  const TuneOptions& opts_;
};

// Damped Newton on the 2x2 system. Returns the converged point or nothing.
std::optional<std::array<double, 2>> newton_solve(const CompensationProblem& problem,
                                                  std::array<double, 2> x, int max_iterations) {
  constexpr double kConverged = 1e-3;  // in tolerance units
  constexpr double kStep = 1e-6;
  auto current = problem.evaluate(x[0], x[1]);
  if (!current) return std::nullopt;

  for (int iter = 0; iter < max_iterations; ++iter) {
    if (std::abs(current->pm) < kConverged && std::abs(current->ugbw) < kConverged) return x;

    double jac[2][2];
    for (int k = 0; k < 2; ++k) {
      auto xp = x;
      auto xm = x;
      xp[k] += kStep;
      xm[k] -= kStep;
      const auto rp = problem.evaluate(xp[0], xp[1]);
      const auto rm = problem.evaluate(xm[0], xm[1]);
      if (!rp || !rm) return std::nullopt;
      jac[0][k] = (rp->pm - rm->pm) / (2.0 * kStep);
      jac[1][k] = (rp->ugbw - rm->ugbw) / (2.0 * kStep);
    }
    const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if (!std::isfinite(det) || std::abs(det) < 1e-300) return std::nullopt;
    const std::array<double, 2> delta{
        -(jac[1][1] * current->pm - jac[0][1] * current->ugbw) / det,
        -(-jac[1][0] * current->pm + jac[0][0] * current->ugbw) / det};

    // Backtrack until the residual norm decreases; cap the step at one e-fold.
    double damping = std::min(1.0, 1.0 / std::max(std::abs(delta[0]), std::abs(delta[1])));
    bool improved = false;
    for (int half = 0; half < 40; ++half, damping *= 0.5) {
      std::array<double, 2> trial{x[0] + damping * delta[0], x[1] + damping * delta[1]};
      trial[0] = std::clamp(trial[0], problem.lo(), problem.hi());
      trial[1] = std::clamp(trial[1], problem.lo(), problem.hi());
      if (trial[0] > trial[1]) continue;
      const auto r = problem.evaluate(trial[0], trial[1]);
      if (r && r->norm() < current->norm()) {
        x = trial;
        current = r;
        improved = true;
        break;
      }
    }
    if (!improved) return std::nullopt;
  }
  if (std::abs(current->pm) < kConverged && std::abs(current->ugbw) < kConverged) return x;
  return std::nullopt;
}

}  // namespace

double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

void PoleZeroGain::validate() const {
  if (!positive_finite(dc_gain)) throw DomainError("dc_gain must be positive and finite");
  for (double p : poles) {
    if (!positive_finite(p)) throw DomainError("pole frequencies must be positive and finite");
  }
  for (double z : zeros) {
    if (!positive_finite(z)) throw DomainError("zero frequencies must be positive and finite");
  }
}

void CompensationParams::validate() const {
  if (!positive_finite(zero_freq) || !positive_finite(pole_freq) || zero_freq > pole_freq) {
    throw DomainError("compensation needs 0 < zero_freq <= pole_freq");
  }
}

Response response(const PoleZeroGain& tf, Hz f) {
  if (!(f > 0.0)) throw DomainError("response frequency must be positive");
  tf.validate();
  double mag = 20.0 * std::log10(tf.dc_gain);
  double phase = 0.0;
  for (double z : tf.zeros) {
    mag += corner_db(f / z);
    phase += std::atan(f / z);
  }
  for (double p : tf.poles) {
    mag -= corner_db(f / p);
    phase -= std::atan(f / p);
  }
  return {mag, phase * kRadToDeg};
}

StabilityReport stability_report(const PoleZeroGain& tf) {
  tf.validate();
  if (!(tf.dc_gain > 1.0)) throw NotApplicableError("loop gain never exceeds unity");

  double f_lo = 1.0;
  for (double c : tf.poles) f_lo = std::min(f_lo, c);
  for (double c : tf.zeros) f_lo = std::min(f_lo, c);
  f_lo *= 1e-3;

  // Walk a log grid to the first 0 dB crossing, then bisect in log f.
  constexpr double kGridRatio = 1.0232929922807541;  // 10^(1/100)
  constexpr double kMaxFrequency = 1e18;
  double f_hi = f_lo;
  while (magnitude_db(tf, f_hi) > 0.0) {
    f_lo = f_hi;
    f_hi *= kGridRatio;
    if (f_hi > kMaxFrequency) throw NotApplicableError("no unity-gain crossing below 1e18 Hz");
  }
  while (f_hi / f_lo - 1.0 > 1e-13) {
    const double mid = std::sqrt(f_lo * f_hi);
    if (magnitude_db(tf, mid) > 0.0) {
      f_lo = mid;
    } else {
      f_hi = mid;
    }
  }
  const double ugbw = std::sqrt(f_lo * f_hi);
  return {ugbw, 180.0 + response(tf, ugbw).phase_deg};
}

PoleZeroGain apply_compensation(const PoleZeroGain& tf, const CompensationParams& comp) {
  comp.validate();
  PoleZeroGain out = tf;
  out.zeros.push_back(comp.zero_freq);
  out.poles.push_back(comp.pole_freq);
  return out;
}

CompensationParams tune_compensation(const PoleZeroGain& tf, double pm_target_deg,
                                     Hz ugbw_target, const TuneOptions& opts) {
  if (!(pm_target_deg >= 45.0 && pm_target_deg <= 70.0)) {
    throw RangeError("phase margin target must lie in [45, 70] degrees");
  }
  if (!positive_finite(ugbw_target)) throw DomainError("ugbw target must be positive");
  const auto base = stability_report(tf);

  if (std::abs(base.phase_margin_deg - pm_target_deg) <= opts.pm_tolerance_deg &&
      std::abs(base.ugbw / ugbw_target - 1.0) <= opts.ugbw_rel_tolerance) {
    return {base.ugbw, base.ugbw};
  }

  const CompensationProblem problem(tf, pm_target_deg, ugbw_target, opts);
  struct Seed {
    double norm;
    std::array<double, 2> x;
  };
  std::vector<Seed> seeds;
  const int n = std::max(opts.grid_points, 2);
  const double step = (problem.hi() - problem.lo()) / (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double lz = problem.lo() + step * i;
      const double lp = problem.lo() + step * j;
      if (const auto r = problem.evaluate(lz, lp)) seeds.push_back({r->norm(), {lz, lp}});
    }
  }
  std::sort(seeds.begin(), seeds.end(),
            [](const Seed& a, const Seed& b) { return a.norm < b.norm; });

  constexpr std::size_t kMaxStarts = 12;
  for (std::size_t s = 0; s < std::min(kMaxStarts, seeds.size()); ++s) {
    const auto solved = newton_solve(problem, seeds[s].x, opts.max_iterations);
    if (solved && problem.in_box((*solved)[0], (*solved)[1])) {
      return {std::exp((*solved)[0]), std::exp((*solved)[1])};
    }
  }
  throw InfeasibleError("no lead compensation in the search box meets the targets");
}

double butterworth_attenuation(int order, Hz fc, Hz f) {
  if (order < 1) throw DomainError("Butterworth order must be >= 1");
  if (!(fc > 0.0) || !(f > 0.0)) throw DomainError("Butterworth frequencies must be positive");
  return 10.0 * std::log1p(std::pow(f / fc, 2.0 * order)) / std::numbers::ln10;
}

double chain_output_asd(std::span<const NoiseStage> stages, double supply_asd, Hz f) {
  if (!(f > 0.0)) throw DomainError("noise frequency must be positive");
  double total_power = 0.0;
  // Gain from the input of stage k to the output is the product of stages k..end.
  double gain_to_output = 1.0;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
    gain_to_output *= db_to_gain(response(it->forward_gain, f).magnitude_db);
    const double rejection = it->supply_rejection_db ? it->supply_rejection_db(f) : 0.0;
    const double supply_at_input = supply_asd * db_to_gain(-rejection);
    const double source = it->source_asd * gain_to_output;
    const double supply = supply_at_input * gain_to_output;
    total_power += source * source + supply * supply;
  }
  return std::sqrt(total_power);
}

PoleZeroGain canonical_loop() {
  return {db_to_gain(kCanonicalDcGainDb), {kCanonicalPole1, kCanonicalPole2, kCanonicalPole3}, {}};
}

void to_json(nlohmann::json& j, const PoleZeroGain& tf) {
  j = nlohmann::json{{"dc_gain", tf.dc_gain}, {"poles", tf.poles}, {"zeros", tf.zeros}};
}

void from_json(const nlohmann::json& j, PoleZeroGain& tf) {
  try {
    if (!j.is_object()) throw SchemaError("transfer function must be a JSON object");
    PoleZeroGain out;
    if (j.contains("dc_gain_db")) {
      out.dc_gain = db_to_gain(j.at("dc_gain_db").get<double>());
    } else {
      out.dc_gain = j.at("dc_gain").get<double>();
    }
    out.poles = j.value("poles", std::vector<double>{});
    out.zeros = j.value("zeros", std::vector<double>{});
    out.validate();
    tf = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("transfer function: ") + e.what());
  } catch (const DomainError& e) {
    throw SchemaError(std::string("transfer function: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const StabilityReport& r) {
  j = nlohmann::json{{"ugbw_hz", r.ugbw}, {"phase_margin_deg", r.phase_margin_deg}};
}

void to_json(nlohmann::json& j, const CompensationParams& c) {
  j = nlohmann::json{{"zero_freq", c.zero_freq}, {"pole_freq", c.pole_freq}};
}

void from_json(const nlohmann::json& j, CompensationParams& c) {
  try {
    c.zero_freq = j.at("zero_freq").get<double>();
    c.pole_freq = j.at("pole_freq").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("compensation: ") + e.what());
  }
}

}  // namespace qpower::analog
