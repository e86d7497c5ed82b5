#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "qpower/analog_chain.hpp"
#include "qpower/errors.hpp"

namespace {

using namespace qpower;
using analog::PoleZeroGain;

constexpr double kPi = std::numbers::pi;

// Independent evaluation of the loop gain with complex arithmetic.
std::complex<double> loop_gain(const PoleZeroGain& tf, double f) {
  std::complex<double> h = tf.dc_gain;
  for (double z : tf.zeros) h *= std::complex<double>(1.0, f / z);
  for (double p : tf.poles) h /= std::complex<double>(1.0, f / p);
  return h;
}

double unwrapped_phase_deg(const PoleZeroGain& tf, double f) {
  double phase = 0.0;
  for (double z : tf.zeros) phase += std::atan(f / z);
  for (double p : tf.poles) phase -= std::atan(f / p);
  return phase * 180.0 / kPi;
}

// Dense log sweep, then linear interpolation of log|H| between the two grid
// points that straddle unity.
analog::StabilityReport brute_force_report(const PoleZeroGain& tf, double f_lo, double f_hi, int points) {
  double f_prev = f_lo;
  double m_prev = std::log(std::abs(loop_gain(tf, f_lo)));
  for (int i = 1; i < points; ++i) {
    const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(i) / (points - 1));
    const double m = std::log(std::abs(loop_gain(tf, f)));
    if (m_prev > 0.0 && m <= 0.0) {
      const double x = std::log(f_prev) + (std::log(f) - std::log(f_prev)) * m_prev / (m_prev - m);
      const double ugbw = std::exp(x);
      return {ugbw, 180.0 + unwrapped_phase_deg(tf, ugbw)};
    }
    f_prev = f;
    m_prev = m;
  }
  return {0.0, 0.0};
}

TEST(Response, PoleCornerIdentity) {
  const PoleZeroGain tf{10.0, {1e3}, {}};
  const auto r = analog::response(tf, 1e3);
  EXPECT_NEAR(r.magnitude_db, 20.0 - 3.0103, 1e-4);
  EXPECT_NEAR(r.phase_deg, -45.0, 1e-12);
}

TEST(Response, ZeroCornerIdentity) {
  const PoleZeroGain tf{1.0, {}, {2e4}};
  const auto r = analog::response(tf, 2e4);
  EXPECT_NEAR(r.magnitude_db, 3.0103, 1e-4);
  EXPECT_NEAR(r.phase_deg, 45.0, 1e-12);
}

TEST(Response, MatchesComplexEvaluation) {
  const PoleZeroGain tf{1000.0, {1e3}, {}};
  const auto r = analog::response(tf, 1e5);
  EXPECT_NEAR(r.magnitude_db, 19.9996, 1e-4);
  EXPECT_NEAR(r.phase_deg, -89.43, 5e-3);

  const PoleZeroGain mixed{3.7e4, {12.0, 4e5, 9e7}, {3e6, 2e4}};
  for (double f : {0.1, 10.0, 1e3, 1e5, 3e6, 1e8, 1e10}) {
    const auto h = loop_gain(mixed, f);
    const auto got = analog::response(mixed, f);
    EXPECT_NEAR(got.magnitude_db, 20.0 * std::log10(std::abs(h)), 1e-9) << f;
    EXPECT_NEAR(got.phase_deg, unwrapped_phase_deg(mixed, f), 1e-9) << f;
  }
}

TEST(Response, NonPositiveFrequencyThrows) {
  const PoleZeroGain tf{10.0, {1e3}, {}};
  EXPECT_THROW(analog::response(tf, 0.0), DomainError);
  EXPECT_THROW(analog::response(tf, -1.0), DomainError);
}

TEST(Response, InvalidTransferFunctionThrows) {
  EXPECT_THROW(analog::response(PoleZeroGain{0.0, {1.0}, {}}, 1.0), DomainError);
  EXPECT_THROW(analog::response(PoleZeroGain{1.0, {-1.0}, {}}, 1.0), DomainError);
}

TEST(StabilityReport, DominantPoleLimit) {
  const PoleZeroGain tf{1e6, {1.0}, {}};
  const auto r = analog::stability_report(tf);
  EXPECT_NEAR(r.ugbw, 1e6, 1.0);
  EXPECT_NEAR(r.phase_margin_deg, 90.0, 1e-3);
}

TEST(StabilityReport, TwoEqualPolesAgainstBruteForceSweep) {
  const PoleZeroGain tf{100.0, {1e4, 1e4}, {}};
  const auto r = analog::stability_report(tf);
  const auto oracle = brute_force_report(tf, 1e3, 1e7, 400001);
  EXPECT_NEAR(r.phase_margin_deg, oracle.phase_margin_deg, 0.01);
  EXPECT_NEAR(r.ugbw, oracle.ugbw, oracle.ugbw * 1e-5);
  // Analytic: (f/p)^2 = 99.
  EXPECT_NEAR(r.ugbw, 1e4 * std::sqrt(99.0), 1e-3);
}

TEST(StabilityReport, UnityCrossingIsTight) {
  for (const auto& tf : {analog::canonical_loop(), PoleZeroGain{100.0, {1e4, 1e4}, {}},
                         PoleZeroGain{5e4, {30.0, 2e6}, {8e5}}}) {
    const auto r = analog::stability_report(tf);
    EXPECT_LT(std::abs(analog::response(tf, r.ugbw).magnitude_db), 1e-6);
  }
}

TEST(StabilityReport, NoCrossingThrows) {
  EXPECT_THROW(analog::stability_report(PoleZeroGain{0.5, {1e3}, {}}), NotApplicableError);
  EXPECT_THROW(analog::stability_report(PoleZeroGain{10.0, {}, {}}), NotApplicableError);
  EXPECT_THROW(analog::stability_report(PoleZeroGain{10.0, {1e3}, {1e2}}), NotApplicableError);
}

TEST(CanonicalLoop, ReproducesUncompensatedReport) {
  const auto r = analog::stability_report(analog::canonical_loop());
  EXPECT_NEAR(r.phase_margin_deg, 18.1, 1e-6);
  EXPECT_NEAR(r.ugbw, 5.95e6, 5.95e6 * 1e-9);
}

TEST(CanonicalLoop, PolesMatchIndependentRefit) {
  // 2-D Newton on (ln p1, ln p2): |H(5.95 MHz)| = 1 and phase = 18.1 - 180.
  const double a0 = std::pow(10.0, 110.0 / 20.0);
  const double fu = 5.95e6;
  auto residual = [&](double lp1, double lp2) {
    const PoleZeroGain tf{a0, {std::exp(lp1), std::exp(lp2), 50e6}, {}};
    return std::array<double, 2>{std::log(std::abs(loop_gain(tf, fu))),
                                 (unwrapped_phase_deg(tf, fu) + 161.9) * kPi / 180.0};
  };
  double x = std::log(30.0);
  double y = std::log(1e6);
  for (int it = 0; it < 100; ++it) {
    const auto r = residual(x, y);
    const double h = 1e-7;
    const auto rx = residual(x + h, y);
    const auto ry = residual(x, y + h);
    const double j00 = (rx[0] - r[0]) / h, j01 = (ry[0] - r[0]) / h;
    const double j10 = (rx[1] - r[1]) / h, j11 = (ry[1] - r[1]) / h;
    const double det = j00 * j11 - j01 * j10;
    const double dx = (r[0] * j11 - r[1] * j01) / det;
    const double dy = (j00 * r[1] - j10 * r[0]) / det;
    x -= std::clamp(dx, -1.0, 1.0);
    y -= std::clamp(dy, -1.0, 1.0);
    if (std::abs(dx) + std::abs(dy) < 1e-14) break;
  }
  EXPECT_NEAR(std::exp(x), analog::kCanonicalPole1, analog::kCanonicalPole1 * 1e-7);
  EXPECT_NEAR(std::exp(y), analog::kCanonicalPole2, analog::kCanonicalPole2 * 1e-7);
}

TEST(ApplyCompensation, CancellingPairIsNeutral) {
  const auto tf = analog::canonical_loop();
  const auto comp = analog::apply_compensation(tf, {3.3e5, 3.3e5});
  for (double f = 1.0; f < 1e10; f *= 3.7) {
    const auto a = analog::response(tf, f);
    const auto b = analog::response(comp, f);
    EXPECT_NEAR(a.magnitude_db, b.magnitude_db, 1e-12) << f;
    EXPECT_NEAR(a.phase_deg, b.phase_deg, 1e-12) << f;
  }
}

TEST(ApplyCompensation, LeavesInputUntouchedAndAppends) {
  const auto tf = analog::canonical_loop();
  const auto out = analog::apply_compensation(tf, {1e6, 1e8});
  EXPECT_EQ(tf.poles.size(), 3u);
  EXPECT_TRUE(tf.zeros.empty());
  ASSERT_EQ(out.poles.size(), 4u);
  ASSERT_EQ(out.zeros.size(), 1u);
  EXPECT_EQ(out.poles.back(), 1e8);
  EXPECT_EQ(out.zeros.back(), 1e6);
}

TEST(ApplyCompensation, InvalidPairThrows) {
  EXPECT_THROW(analog::apply_compensation(analog::canonical_loop(), {2e6, 1e6}), DomainError);
  EXPECT_THROW(analog::apply_compensation(analog::canonical_loop(), {0.0, 1e6}), DomainError);
}

TEST(ApplyCompensation, WideLeadRaisesPhaseMargin) {
  const auto tf = analog::canonical_loop();
  const auto before = analog::stability_report(tf);
  const auto after = analog::stability_report(analog::apply_compensation(tf, {before.ugbw / 2.0, before.ugbw * 100.0}));
  EXPECT_GT(after.phase_margin_deg, before.phase_margin_deg);
}

TEST(TuneCompensation, CanonicalTargets) {
  const auto tf = analog::canonical_loop();
  const auto comp = analog::tune_compensation(tf, 64.8, 8.12e6);
  EXPECT_LT(comp.zero_freq, comp.pole_freq);
  const auto r = analog::stability_report(analog::apply_compensation(tf, comp));
  EXPECT_NEAR(r.phase_margin_deg, 64.8, 0.1);
  EXPECT_NEAR(r.ugbw, 8.12e6, 8.12e6 * 1e-3);
  EXPECT_GE(comp.zero_freq, 1e3);
  EXPECT_LE(comp.pole_freq, 1e9);
}

TEST(TuneCompensation, Deterministic) {
  const auto tf = analog::canonical_loop();
  const auto a = analog::tune_compensation(tf, 64.8, 8.12e6);
  const auto b = analog::tune_compensation(tf, 64.8, 8.12e6);
  EXPECT_EQ(a.zero_freq, b.zero_freq);
  EXPECT_EQ(a.pole_freq, b.pole_freq);
}

TEST(TuneCompensation, CompliantLoopGetsCancellingPair) {
  const PoleZeroGain tf{1e5, {10.0, 1e6}, {}};
  const auto own = analog::stability_report(tf);
  const auto comp = analog::tune_compensation(tf, own.phase_margin_deg, own.ugbw);
  const auto tuned = analog::apply_compensation(tf, comp);
  for (double f : {1.0, 1e3, own.ugbw, 1e8}) {
    EXPECT_NEAR(analog::response(tuned, f).magnitude_db, analog::response(tf, f).magnitude_db, 1e-9);
    EXPECT_NEAR(analog::response(tuned, f).phase_deg, analog::response(tf, f).phase_deg, 1e-9);
  }
}

TEST(TuneCompensation, TargetOutsideWindowThrows) {
  EXPECT_THROW(analog::tune_compensation(analog::canonical_loop(), 30.0, 8.12e6), RangeError);
  EXPECT_THROW(analog::tune_compensation(analog::canonical_loop(), 75.0, 8.12e6), RangeError);
}

TEST(TuneCompensation, UnreachableTargetIsInfeasible) {
  // Far more phase than a single lead can add at this crossover.
  EXPECT_THROW(analog::tune_compensation(analog::canonical_loop(), 70.0, 4e7), InfeasibleError);
}

TEST(TuneCompensation, HoldsWindowUnderPolePerturbation) {
  const auto nominal = analog::canonical_loop();
  const auto comp = analog::tune_compensation(nominal, 64.8, 8.12e6);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> scale(0.95, 1.05);
  for (int i = 0; i < 20; ++i) {
    auto tf = nominal;
    for (double& p : tf.poles) p *= scale(rng);
    const auto r = analog::stability_report(analog::apply_compensation(tf, comp));
    EXPECT_GE(r.phase_margin_deg, 45.0);
    EXPECT_LE(r.phase_margin_deg, 70.0);
  }
}

TEST(TuneCompensation, RetunesScaledPlants) {
  for (double k : {0.95, 1.05}) {
    auto tf = analog::canonical_loop();
    for (double& p : tf.poles) p *= k;
    const auto comp = analog::tune_compensation(tf, 64.8, 8.12e6 * k);
    const auto r = analog::stability_report(analog::apply_compensation(tf, comp));
    EXPECT_NEAR(r.phase_margin_deg, 64.8, 0.1) << k;
    EXPECT_NEAR(r.ugbw, 8.12e6 * k, 8.12e3 * k) << k;
  }
  auto slow = analog::canonical_loop();
  for (double& p : slow.poles) p *= 0.95;
  const auto r = analog::stability_report(analog::apply_compensation(slow, analog::tune_compensation(slow, 64.8, 8.12e6)));
  EXPECT_NEAR(r.phase_margin_deg, 64.8, 0.1);
}

TEST(AnalogProperty, GainScalingLeavesPhaseUnchanged) {
  const auto tf = analog::canonical_loop();
  for (double k : {1e-3, 0.5, 2.0, 1e4}) {
    auto scaled = tf;
    scaled.dc_gain *= k;
    for (double f = 0.5; f < 1e10; f *= 2.3) {
      ASSERT_EQ(analog::response(scaled, f).phase_deg, analog::response(tf, f).phase_deg);
    }
    if (k > 1.0) {
      EXPECT_GT(analog::stability_report(scaled).ugbw, analog::stability_report(tf).ugbw);
    }
  }
}

TEST(AnalogProperty, PoleZeroCancellation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> logf(0.0, 9.0);
  const auto tf = PoleZeroGain{4e4, {20.0, 3e5}, {7e6}};
  for (int i = 0; i < 50; ++i) {
    const double c = std::pow(10.0, logf(rng));
    auto cancelled = tf;
    cancelled.zeros.push_back(c);
    cancelled.poles.push_back(c);
    const double f = std::pow(10.0, logf(rng));
    EXPECT_NEAR(analog::response(cancelled, f).magnitude_db, analog::response(tf, f).magnitude_db, 1e-12);
    EXPECT_NEAR(analog::response(cancelled, f).phase_deg, analog::response(tf, f).phase_deg, 1e-12);
  }
}

TEST(Butterworth, CornerIsThreeDb) {
  for (int order = 1; order <= 8; ++order) {
    EXPECT_NEAR(analog::butterworth_attenuation(order, 250.0, 250.0), 3.0103, 1e-4);
  }
}

TEST(Butterworth, DecadeAboveCorner) {
  EXPECT_NEAR(analog::butterworth_attenuation(1, 100.0, 1e3), 10.0 * std::log10(101.0), 1e-12);
  EXPECT_NEAR(analog::butterworth_attenuation(1, 100.0, 1e3), 20.04, 5e-3);
  EXPECT_NEAR(analog::butterworth_attenuation(3, 100.0, 1e3), 60.0, 1e-5);
}

TEST(Butterworth, MonotoneInFrequencyAndOrder) {
  for (int order = 1; order <= 6; ++order) {
    double prev = 0.0;
    for (double f = 101.0; f < 1e6; f *= 1.1) {
      const double a = analog::butterworth_attenuation(order, 100.0, f);
      EXPECT_GT(a, prev);
      EXPECT_GT(analog::butterworth_attenuation(order + 1, 100.0, f), a);
      prev = a;
    }
  }
}

TEST(Butterworth, InvalidArgumentsThrow) {
  EXPECT_THROW(analog::butterworth_attenuation(0, 100.0, 1e3), DomainError);
  EXPECT_THROW(analog::butterworth_attenuation(1, 0.0, 1e3), DomainError);
  EXPECT_THROW(analog::butterworth_attenuation(1, 100.0, 0.0), DomainError);
}

analog::NoiseStage unity_stage(double asd, double psrr_db = 0.0) {
  return {asd, PoleZeroGain{1.0, {}, {}}, [psrr_db](double) { return psrr_db; }};
}

TEST(ChainNoise, SingleUnityStage) {
  const std::vector stages{unity_stage(20e-9)};
  EXPECT_NEAR(analog::chain_output_asd(stages, 0.0, 1e3), 20e-9, 1e-24);
}

TEST(ChainNoise, RootSumSquare) {
  const std::vector stages{unity_stage(3e-9), unity_stage(4e-9)};
  EXPECT_NEAR(analog::chain_output_asd(stages, 0.0, 1e3), 5e-9, 1e-22);
}

TEST(ChainNoise, SupplyThroughRejection) {
  for (double psrr_db : {30.0, 60.0, 90.0}) {
    const std::vector stages{unity_stage(15e-9, psrr_db)};
    const double expected = std::hypot(1.2e-6 / std::pow(10.0, psrr_db / 20.0), 15e-9);
    EXPECT_NEAR(analog::chain_output_asd(stages, 1.2e-6, 1e3), expected, 1e-20);
  }
  const std::vector high{unity_stage(15e-9, 90.0)};
  const std::vector low{unity_stage(15e-9, 30.0)};
  EXPECT_NEAR(analog::chain_output_asd(high, 1.2e-6, 1e3), 15.00e-9, 0.01e-9);
  EXPECT_NEAR(analog::chain_output_asd(low, 1.2e-6, 1e3), 40.80e-9, 0.01e-9);
}

TEST(ChainNoise, LaterGainAmplifiesEarlierStages) {
  const std::vector<analog::NoiseStage> stages{unity_stage(2e-9),
                                               {1e-9, PoleZeroGain{10.0, {}, {}}, nullptr}};
  EXPECT_NEAR(analog::chain_output_asd(stages, 0.0, 1.0), std::hypot(20e-9, 10e-9), 1e-22);
}

TEST(ChainNoise, PermutationInvariantAndAboveLargestTerm) {
  std::vector stages{unity_stage(3e-9, 60.0), unity_stage(11e-9, 80.0), unity_stage(7e-9, 70.0)};
  const double base = analog::chain_output_asd(stages, 1e-6, 1e3);
  std::sort(stages.begin(), stages.end(), [](const auto& a, const auto& b) { return a.source_asd < b.source_asd; });
  do {
    EXPECT_NEAR(analog::chain_output_asd(stages, 1e-6, 1e3), base, base * 1e-14);
    for (const auto& s : stages) EXPECT_GE(base, s.source_asd);
  } while (std::next_permutation(stages.begin(), stages.end(),
                                 [](const auto& a, const auto& b) { return a.source_asd < b.source_asd; }));
}

TEST(TransferFunctionJson, RoundTripAndDecibelGain) {
  const auto tf = analog::canonical_loop();
  const nlohmann::json j = tf;
  const auto back = j.get<PoleZeroGain>();
  EXPECT_EQ(back.dc_gain, tf.dc_gain);
  EXPECT_EQ(back.poles, tf.poles);

  const auto db = nlohmann::json{{"dc_gain_db", 40.0}, {"poles", {1e3}}}.get<PoleZeroGain>();
  EXPECT_NEAR(db.dc_gain, 100.0, 1e-12);
  EXPECT_THROW((nlohmann::json{{"poles", {1e3}}}.get<PoleZeroGain>()), SchemaError);
  EXPECT_THROW((nlohmann::json{{"dc_gain", 10.0}, {"poles", {-5.0}}}.get<PoleZeroGain>()), SchemaError);
}

}  // namespace
