#pragma once

#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace qpower::analog {

using Hz = double;

// Open-loop gain A0 * prod(1 + jf/z) / prod(1 + jf/p), all corners in the
// left half plane (minimum phase, no transport delay).
struct PoleZeroGain {
  double dc_gain = 1.0;
  std::vector<Hz> poles;
  std::vector<Hz> zeros;

  void validate() const;
};

struct Response {
  double magnitude_db = 0.0;
  double phase_deg = 0.0;
};

struct StabilityReport {
  Hz ugbw = 0.0;
  double phase_margin_deg = 0.0;
};

// Lead network: one zero below one pole. zero == pole is accepted as the
// response-neutral cancelling pair.
struct CompensationParams {
  Hz zero_freq = 0.0;
  Hz pole_freq = 0.0;

  void validate() const;
};

struct NoiseStage {
  double source_asd = 0.0;  // V/sqrt(Hz), referred to the stage input
  PoleZeroGain forward_gain;
  std::function<double(Hz)> supply_rejection_db = [](Hz) { return 0.0; };
};

Response response(const PoleZeroGain& tf, Hz f);

// Throws NotApplicableError when |H(0)| <= 1 or the magnitude never drops
// below 0 dB.
StabilityReport stability_report(const PoleZeroGain& tf);

PoleZeroGain apply_compensation(const PoleZeroGain& tf, const CompensationParams& comp);

struct TuneOptions {
  double pm_tolerance_deg = 0.1;
  double ugbw_rel_tolerance = 1e-3;
  Hz box_lo = 1e3;
  Hz box_hi = 1e9;
  int grid_points = 31;  // per axis, log spaced
  int max_iterations = 60;
};

// Fits (zero_freq, pole_freq) so the compensated loop meets both targets.
// Log-grid seeding followed by damped Newton in log-frequency coordinates.
// Throws InfeasibleError when no seed converges inside the search box.
CompensationParams tune_compensation(const PoleZeroGain& tf, double pm_target_deg,
                                     Hz ugbw_target, const TuneOptions& opts = {});

// Positive attenuation in dB of an order-n Butterworth low-pass.
double butterworth_attenuation(int order, Hz fc, Hz f);

// Output noise density of a cascade. Each stage injects its own source and
// the PSRR-attenuated supply noise at its input; both are carried to the
// output by the gain of that stage and every later one. Sources are summed
// as uncorrelated.
double chain_output_asd(std::span<const NoiseStage> stages, double supply_asd, Hz f);

// Uncompensated buffer + power-amplifier loop: 110 dB DC gain, three poles
// with the upper one fixed at 50 MHz. The lower two are fitted so the loop
// crosses unity at 5.95 MHz with 18.1 degrees of phase margin.
inline constexpr double kCanonicalDcGainDb = 110.0;
inline constexpr Hz kCanonicalPole1 = 45.02798413509833;
inline constexpr Hz kCanonicalPole2 = 2760112.2880900186;
inline constexpr Hz kCanonicalPole3 = 50e6;

PoleZeroGain canonical_loop();

// Compensated targets for the canonical loop.
inline constexpr double kTargetPhaseMarginDeg = 64.8;
inline constexpr Hz kTargetUgbw = 8.12e6;

// 10 ** (db / 20)
double db_to_gain(double db);

// {"dc_gain": 316227.8, "poles": [...], "zeros": [...]}; "dc_gain_db" may
// replace "dc_gain". Malformed documents raise SchemaError.
void to_json(nlohmann::json& j, const PoleZeroGain& tf);
void from_json(const nlohmann::json& j, PoleZeroGain& tf);
void to_json(nlohmann::json& j, const StabilityReport& r);
void to_json(nlohmann::json& j, const CompensationParams& c);
void from_json(const nlohmann::json& j, CompensationParams& c);

}  // namespace qpower::analog
