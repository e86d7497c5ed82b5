#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "qpower/dac.hpp"
#include "qpower/errors.hpp"
#include "qpower/handle.hpp"
#include "qpower/instrument.hpp"
#include "qpower/metrology.hpp"
#include "qpower/noise.hpp"

namespace {

using namespace qpower;
using namespace qpower::twin;

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("qpower_instrument_test_" + name);
}

InstrumentState fresh() { return InstrumentState::power_on(InstrumentConfig{}); }

std::vector<std::string> lines(const std::string& reply) {
  std::vector<std::string> out;
  std::istringstream is(reply);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

TEST(Protocol, Identity) {
  auto s = fresh();
  EXPECT_EQ(apply_command(s, "*IDN?").rfind("QPOWER-TWIN,2CH,", 0), 0u);
  EXPECT_EQ(apply_command(s, "*idn?\n"), apply_command(s, "*IDN?"));
}

TEST(Protocol, SetEchoesQuantizedValue) {
  auto s = fresh();
  // Code 771452 is nearest to 3.3 V: -7 + 771452 * 14/1048575 = 3.3000052452...
  EXPECT_EQ(apply_command(s, "SET 1 3.3"), "OK 3.300005");
  char expected[64];
  std::snprintf(expected, sizeof expected, "%.9g",
                dac::code_to_voltage(s.config.dac, dac::voltage_to_code(s.config.dac, 3.3)));
  EXPECT_EQ(apply_command(s, "GET 1"), expected);
}

TEST(Protocol, ErrorReplies) {
  auto s = fresh();
  EXPECT_EQ(apply_command(s, "SET 1 9.0"), "ERR RANGE");
  EXPECT_EQ(apply_command(s, "SET 3 1.0"), "ERR CHAN");
  EXPECT_EQ(apply_command(s, "SET 1"), "ERR SYNTAX");
  EXPECT_EQ(apply_command(s, "SET 1 abc"), "ERR SYNTAX");
  EXPECT_EQ(apply_command(s, "FROB 1"), "ERR SYNTAX");
  EXPECT_EQ(apply_command(s, ""), "ERR SYNTAX");
  EXPECT_EQ(apply_command(s, "RAMP 1 1.0 0"), "ERR RANGE");
  EXPECT_EQ(apply_command(s, "MEAS 1 1e6 1"), "ERR RANGE");
  EXPECT_EQ(apply_command(s, "SET 1 " + std::string(300, '1')), "ERR SYNTAX");
}

TEST(Protocol, FailedCommandLeavesStateUntouched) {
  auto s = fresh();
  apply_command(s, "SET 2 1.5");
  const auto before = snapshot_json(s);
  apply_command(s, "SET 2 8");
  apply_command(s, "RAMP 2 9 1");
  EXPECT_EQ(snapshot_json(s), before);
}

TEST(Protocol, StatAndMeasure) {
  auto s = fresh();
  apply_command(s, "SET 1 -2");
  char stat[64];
  std::snprintf(stat, sizeof stat, "CV %.9g ", dac::code_to_voltage(s.config.dac, dac::voltage_to_code(s.config.dac, -2.0)));
  EXPECT_EQ(apply_command(s, "STAT 1").rfind(stat, 0), 0u);
  const auto reply = lines(apply_command(s, "MEAS 1 1e6 8"));
  ASSERT_EQ(reply.size(), 10u);
  EXPECT_EQ(reply.front(), "OK 8");
  EXPECT_EQ(reply.back(), "END");
  EXPECT_NEAR(std::stod(reply[1]), -2.0, 1e-3);
}

TEST(SetVoltage, ZeroPicksEvenCode) {
  auto s = fresh();
  const double v = set_voltage(s, 1, 0.0);
  EXPECT_EQ(s.channel(1).code.value(), 524288u);
  EXPECT_NEAR(v, 7.0 / 1048575.0, 1e-15);
}

TEST(SetVoltage, FullScale) {
  auto s = fresh();
  EXPECT_EQ(set_voltage(s, 2, 7.0), 7.0);
  EXPECT_EQ(s.channel(2).code.value(), dac::kMaxCode);
}

TEST(SetVoltage, RejectsRatherThanClamps) {
  auto s = fresh();
  set_voltage(s, 1, 1.0);
  EXPECT_THROW(set_voltage(s, 1, 7.01), RangeError);
  EXPECT_THROW(set_voltage(s, 1, -9.0), RangeError);
  EXPECT_THROW(set_voltage(s, 3, 0.0), ChannelError);
  EXPECT_NEAR(s.channel(1).applied_v, 1.0, 1e-5);
}

TEST(SetVoltage, EchoEqualsQuantizerComposition) {
  auto s = fresh();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> v(-7.0, 7.0);
  for (int i = 0; i < 2000; ++i) {
    const double target = v(rng);
    ASSERT_EQ(set_voltage(s, 1, target),
              dac::code_to_voltage(s.config.dac, dac::voltage_to_code(s.config.dac, target)));
  }
}

TEST(CurrentLimit, ClampsIntoConstantCurrent) {
  auto s = fresh();
  set_load(s, 1, 10.0);
  EXPECT_NEAR(set_voltage(s, 1, 7.0), 2.0, 1e-12);
  EXPECT_EQ(s.channel(1).mode, Mode::kConstantCurrent);
  EXPECT_EQ(apply_command(s, "STAT 1").substr(0, 2), "CC");
  set_load(s, 1, std::numeric_limits<double>::infinity());
  EXPECT_EQ(s.channel(1).applied_v, 7.0);
  EXPECT_EQ(s.channel(1).mode, Mode::kConstantVoltage);
  EXPECT_EQ(apply_command(s, "RLOAD 1 -5"), "ERR RANGE");
}

TEST(CurrentLimit, NeverExceededOverRandomPairs) {
  auto s = fresh();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> v(-7.0, 7.0);
  std::uniform_real_distribution<double> log_r(-2.0, 4.0);
  for (int i = 0; i < 10000; ++i) {
    set_load(s, 1, std::pow(10.0, log_r(rng)));
    set_voltage(s, 1, v(rng));
    const auto& ch = s.channel(1);
    ASSERT_LE(std::abs(ch.applied_v) / ch.load_ohms, 0.2);
    ASSERT_EQ(ch.mode == Mode::kConstantCurrent, std::abs(ch.setpoint_v) / ch.load_ohms > 0.2);
  }
}

TEST(Ramp, TargetEqualToSetpointCompletesImmediately) {
  auto s = fresh();
  set_voltage(s, 1, 1.0);
  const auto ev = ramp(s, 1, 1.0, 5.0);
  EXPECT_EQ(ev.steps, 0u);
  EXPECT_EQ(ev.duration, 0.0);
}

TEST(Ramp, UpAtTenVoltsPerSecond) {
  auto s = fresh();
  set_voltage(s, 1, 0.0);
  const auto ev = ramp(s, 1, 1.0, 10.0);
  EXPECT_NEAR(ev.duration, 0.1, kRampInterval);
  const auto pts = ramp_setpoints(s.config.dac, s.channel(1).setpoint_v, 1.0, 10.0);
  ASSERT_EQ(pts.size(), ev.steps);
  for (std::size_t i = 1; i < pts.size(); ++i) ASSERT_GE(pts[i], pts[i - 1]);
  EXPECT_EQ(pts.back(), dac::code_to_voltage(s.config.dac, dac::voltage_to_code(s.config.dac, 1.0)));
}

TEST(Ramp, DownToMinusSevenAtOneVoltPerSecond) {
  auto s = fresh();
  const double start = s.channel(2).setpoint_v;
  const auto ev = ramp(s, 2, -7.0, 1.0);
  EXPECT_NEAR(ev.duration, std::ceil((start + 7.0) / 1.0 / kRampInterval - 1e-9) * kRampInterval, 1e-9);
  const auto pts = ramp_setpoints(s.config.dac, s.channel(2).setpoint_v, -7.0, 1.0);
  for (std::size_t i = 1; i < pts.size(); ++i) ASSERT_LE(pts[i], pts[i - 1]);
  EXPECT_EQ(pts.back(), -7.0);
}

TEST(Ramp, ProgressesWithUptimeAndIsReplacedBySet) {
  auto s = fresh();
  ramp(s, 1, 1.0, 10.0);
  advance_to(s, 0.05);
  EXPECT_NEAR(s.channel(1).setpoint_v, 0.5, 1e-4);
  advance_to(s, 0.2);
  EXPECT_NEAR(s.channel(1).setpoint_v, 1.0, 1e-5);
  EXPECT_FALSE(s.channel(1).ramp.has_value());

  ramp(s, 1, -1.0, 1.0);
  advance_to(s, 0.7);
  set_voltage(s, 1, 3.0);
  advance_to(s, 5.0);
  EXPECT_NEAR(s.channel(1).setpoint_v, 3.0, 1e-5);
}

TEST(Ramp, RejectsBadArguments) {
  auto s = fresh();
  EXPECT_THROW(ramp(s, 1, 8.0, 1.0), RangeError);
  EXPECT_THROW(ramp(s, 1, 1.0, -1.0), RangeError);
}

TEST(Measure, ZeroModelsGiveConstantTrace) {
  InstrumentConfig cfg;
  cfg.noise = {};
  cfg.drift.sigma = 0.0;
  cfg.rms_alpha = 0.0;
  auto s = InstrumentState::power_on(cfg);
  set_voltage(s, 1, 0.0);
  const auto t = measure_trace(s, 1, 1e6, 256);
  const double expected = s.channel(1).applied_v + noise::crosstalk_delta(cfg.crosstalk, s.channel(2).applied_v);
  for (double v : t.samples) ASSERT_NEAR(v, expected, 1e-18);
}

TEST(Measure, DeterministicScriptedSequence) {
  auto run = [] {
    Instrument inst{InstrumentConfig{}};
    std::string all;
    for (const char* cmd : {"SET 1 2.5", "ADV 30", "MEAS 1 1e6 64", "RAMP 2 -1 3", "ADV 0.2", "MEAS 2 1e5 64",
                            "MEAS 1 1e6 64"}) {
      all += inst.execute(cmd);
      all += '\n';
    }
    return all;
  };
  EXPECT_EQ(run(), run());
}

TEST(Measure, InvocationIndexChangesNoise) {
  auto s = fresh();
  const auto a = measure_trace(s, 1, 1e6, 64);
  const auto b = measure_trace(s, 1, 1e6, 64);
  EXPECT_NE(a.samples, b.samples);
}

TEST(Measure, CrosstalkFromOtherChannel) {
  auto s = fresh();
  const double base = measure_trace(s, 2, 1e3, 16).mean();
  set_voltage(s, 1, 7.0);
  const double coupled = measure_trace(s, 2, 1e3, 16).mean();
  EXPECT_NEAR(coupled - base, s.config.crosstalk.kappa * (7.0 - 7.0 / 1048575.0), 1e-12);
}

TEST(Measure, DriftAdvancesWithUptime) {
  auto s = fresh();
  const double d0 = s.channel(1).drift_v;
  advance_to(s, 3600.0);
  EXPECT_NE(s.channel(1).drift_v, d0);
  const double d1 = s.channel(1).drift_v;
  measure_trace(s, 1, 1e3, 16);
  EXPECT_EQ(s.channel(1).drift_v, d1);
}

TEST(Measure, RmsFollowsSetpointRule) {
  const InstrumentConfig cfg;
  const double fs = 50e6;
  const std::size_t n = 1 << 17;
  auto band_rms = [&](double v) {
    auto s = InstrumentState::power_on(cfg);
    set_voltage(s, 1, v);
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) {
      const double r = metrology::rms(metrology::bandlimit(measure_trace(s, 1, fs, n), 20e6), true);
      acc += r * r;
    }
    return std::sqrt(acc / 5.0);
  };
  const double floor = band_rms(0.0);
  double previous = floor;
  for (double v : {0.5, 1.0, 3.0, 5.0, 7.0}) {
    const double got = band_rms(v);
    EXPECT_NEAR(got, std::hypot(floor, cfg.rms_alpha * v), 0.05 * std::hypot(floor, cfg.rms_alpha * v)) << v;
    EXPECT_GT(got, previous);
    previous = got;
  }
}

TEST(Persistence, SaveLoadRoundTrip) {
  const auto path = temp_file("state.json");
  auto s = fresh();
  apply_command(s, "SET 1 1.234");
  apply_command(s, "ADV 100");
  const auto get_before = apply_command(s, "GET 1");
  ASSERT_EQ(apply_command(s, "SAVE " + path.string()), "OK");
  apply_command(s, "SET 1 -3");
  ASSERT_EQ(apply_command(s, "LOAD " + path.string()), "OK");
  EXPECT_EQ(apply_command(s, "GET 1"), get_before);
  std::filesystem::remove(path);
}

TEST(Persistence, LoadedStateReproducesOutputs) {
  const auto path = temp_file("replay.json");
  auto s = fresh();
  apply_command(s, "SET 2 0.75");
  apply_command(s, "RAMP 1 2 4");
  apply_command(s, "ADV 0.1");
  measure_trace(s, 2, 1e6, 32);
  save_state(path, s);
  auto restored = load_state(path);
  EXPECT_EQ(snapshot_json(restored), snapshot_json(s));
  for (const char* cmd : {"ADV 12.5", "MEAS 1 1e6 64", "MEAS 2 1e4 64", "ADV 1000", "MEAS 1 1e3 16"}) {
    ASSERT_EQ(apply_command(restored, cmd), apply_command(s, cmd)) << cmd;
  }
  std::filesystem::remove(path);
}

TEST(Persistence, CorruptedFileIsRejected) {
  const auto path = temp_file("corrupt.json");
  std::ofstream(path) << "{\"schema\": \"qpower-twin-state\", \"version\": 1, \"channels\": 5}";
  EXPECT_THROW(load_state(path), SchemaError);
  std::ofstream(path) << "not json";
  EXPECT_THROW(load_state(path), SchemaError);
  std::ofstream(path) << "{\"schema\": \"qpower-twin-state\", \"version\": 99}";
  EXPECT_THROW(load_state(path), SchemaError);

  auto s = fresh();
  apply_command(s, "SET 1 2");
  const auto before = snapshot_json(s);
  EXPECT_EQ(apply_command(s, "LOAD " + path.string()), "ERR IO");
  EXPECT_EQ(snapshot_json(s), before);
  EXPECT_EQ(apply_command(s, "SAVE /nonexistent-dir/x/state.json"), "ERR IO");
  std::filesystem::remove(path);
}

TEST(Instrument, ManualClockOnlyMovesOnAdvance) {
  Instrument inst{InstrumentConfig{}};
  EXPECT_EQ(inst.execute("UPTIME?"), "0");
  EXPECT_EQ(inst.execute("ADV 2.5"), "OK 2.5");
  EXPECT_EQ(inst.execute("UPTIME?"), "2.5");
  EXPECT_EQ(inst.execute("ADV -1"), "ERR RANGE");
}

TEST(Instrument, RealtimeClockRunsScaled) {
  Instrument inst{InstrumentConfig{}, Clock::realtime(1000.0)};
  const double t0 = std::stod(inst.execute("UPTIME?"));
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  const double t1 = std::stod(inst.execute("UPTIME?"));
  EXPECT_GT(t1 - t0, 10.0);
}

TEST(Instrument, LocalHandleTypedWrappers) {
  Instrument inst{InstrumentConfig{}};
  LocalHandle h(inst);
  EXPECT_EQ(remote::identify(h).rfind("QPOWER-TWIN", 0), 0u);
  EXPECT_NEAR(remote::set_voltage(h, 1, 3.3), 3.300005, 1e-6);
  EXPECT_NEAR(remote::get_voltage(h, 1), 3.3, 1e-5);
  const auto t = remote::measure(h, 1, 1e3, 32);
  EXPECT_EQ(t.size(), 32u);
  EXPECT_EQ(t.fs, 1e3);
  EXPECT_NEAR(t.mean(), 3.3, 1e-4);
  EXPECT_EQ(remote::advance(h, 10.0), 10.0);
  remote::set_load(h, 1, 1.0);
  EXPECT_NEAR(remote::get_voltage(h, 1), 0.2, 1e-12);
  remote::set_load(h, 1, std::numeric_limits<double>::infinity());
  remote::ramp(h, 2, 1.0, 100.0);
  EXPECT_THROW(remote::set_voltage(h, 1, 12.0), ProtocolError);
}

}  // namespace
