#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "qpower/config.hpp"
#include "qpower/trace.hpp"

namespace qpower::twin {

enum class Mode { kConstantVoltage, kConstantCurrent };

std::string_view to_string(Mode mode);

inline constexpr double kRampInterval = 1e-3;  // s
inline constexpr std::size_t kMaxLineBytes = 256;
inline constexpr std::size_t kMaxMeasureSamples = std::size_t{1} << 22;

struct Ramp {
  double from = 0.0;
  double target = 0.0;
  double rate = 0.0;        // V/s, positive
  double start_time = 0.0;  // instrument uptime at RAMP
  std::uint64_t steps = 0;  // ticks until the target is reached
};

struct ChannelState {
  dac::Code code{dac::kMaxCode / 2 + 1};
  double setpoint_v = 0.0;  // code_to_voltage(code)
  double applied_v = 0.0;   // setpoint after the current-limit clamp
  dac::ChannelLimits limits;
  double load_ohms = std::numeric_limits<double>::infinity();
  Mode mode = Mode::kConstantVoltage;
  double drift_v = 0.0;
  std::mt19937_64 drift_engine;
  std::uint64_t seed = 0;
  double rms_alpha = 0.0;
  std::uint64_t measurements = 0;
  std::optional<Ramp> ramp;

  double current() const { return std::isinf(load_ohms) ? 0.0 : applied_v / load_ohms; }
};

struct InstrumentState {
  InstrumentConfig config;
  std::array<ChannelState, 2> channels;
  double uptime = 0.0;

  // Both channels at the code nearest 0 V, drift drawn from its stationary law.
  static InstrumentState power_on(const InstrumentConfig& config);

  // 1-based channel access; throws ChannelError.
  ChannelState& channel(int ch);
  const ChannelState& channel(int ch) const;
};

// Rejects (does not clamp) values outside the channel limits. Returns the
// applied voltage after quantization and the current-limit rule.
double set_voltage(InstrumentState& state, int ch, double volts);

void set_load(InstrumentState& state, int ch, double ohms);

struct RampEvent {
  std::uint64_t steps = 0;
  double duration = 0.0;  // s
};

// Starts a ramp from the present setpoint; replaces any ramp in progress.
RampEvent ramp(InstrumentState& state, int ch, double target, double rate);

// Quantized setpoints at each 1 ms tick of a ramp; the last equals the
// quantized target.
std::vector<double> ramp_setpoints(const dac::DacTransfer& dac, double from, double target,
                                   double rate);

// Moves uptime forward: drift follows the OU law and ramps progress.
void advance_to(InstrumentState& state, double uptime);

// Everything needed to render one MEAS reply, captured at dequeue time.
struct MeasurementPlan {
  noise::AsdModel noise;
  double fs = 0.0;
  std::size_t n = 0;
  std::uint64_t noise_seed = 0;
  double dc = 0.0;  // applied + drift + crosstalk
  double t0 = 0.0;
};

MeasurementPlan plan_measurement(InstrumentState& state, int ch, double fs, std::size_t n);
Trace render_measurement(const MeasurementPlan& plan);

// applied_v + shaped noise + drift + crosstalk from the other channel.
// Bumps the channel's invocation counter.
Trace measure_trace(InstrumentState& state, int ch, double fs, std::size_t n);

// JSON snapshot of configuration, setpoints, clocks and RNG states.
nlohmann::json snapshot_json(const InstrumentState& state);
InstrumentState state_from_json(const nlohmann::json& j);
void save_state(const std::filesystem::path& path, const InstrumentState& state);
InstrumentState load_state(const std::filesystem::path& path);

// Applies one protocol line; on error the state is left untouched. The
// reply carries no trailing newline (MEAS replies span several lines).
std::string apply_command(InstrumentState& state, std::string_view line);

// Instrument time source. Manual clocks move only through ADV; real-time
// clocks run at `scale` simulated seconds per wall second.
class Clock {
 public:
  static Clock manual() { return Clock(0.0); }
  static Clock realtime(double scale = 1.0) { return Clock(scale); }

  bool is_manual() const { return scale_ == 0.0; }
  double now() const;
  void rebase(double uptime);

 private:
  explicit Clock(double scale);
  double scale_;
  double base_uptime_ = 0.0;
  std::chrono::steady_clock::time_point base_wall_;
};

struct JournalEntry {
  std::uint64_t sequence = 0;
  std::string request;
  std::string reply;
};

// Thread-safe instrument: every command goes through one serialized queue.
// MEAS samples are rendered outside the lock from a snapshot.
class Instrument {
 public:
  explicit Instrument(const InstrumentConfig& config, Clock clock = Clock::manual());
  Instrument(InstrumentState state, Clock clock);

  std::string execute(std::string_view line);

  InstrumentState snapshot() const;
  void set_journal(bool enabled);
  std::vector<JournalEntry> journal() const;

 private:
  void sync_clock();

  mutable std::mutex mutex_;
  InstrumentState state_;
  Clock clock_;
  bool journal_enabled_ = false;
  std::uint64_t sequence_ = 0;
  std::vector<JournalEntry> journal_;
};

}  // namespace qpower::twin
