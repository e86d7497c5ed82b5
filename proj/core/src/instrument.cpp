#include "qpower/instrument.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qpower/errors.hpp"
#include "qpower/rng.hpp"

namespace qpower::twin {

namespace {

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

// Re-evaluates the current-limit rule for the present setpoint and load.
void apply_limit(ChannelState& ch) {
  const double v = ch.setpoint_v;
  if (!std::isinf(ch.load_ohms) && std::abs(v) / ch.load_ohms > ch.limits.i_max) {
    double clamped = ch.limits.i_max * ch.load_ohms;
    while (clamped / ch.load_ohms > ch.limits.i_max) clamped = std::nextafter(clamped, 0.0);
    ch.applied_v = std::copysign(clamped, v);
    ch.mode = Mode::kConstantCurrent;
  } else {
    ch.applied_v = v;
    ch.mode = Mode::kConstantVoltage;
  }
}

void apply_code(const InstrumentConfig& cfg, ChannelState& ch, dac::Code code) {
  ch.code = code;
  ch.setpoint_v = dac::code_to_voltage(cfg.dac, code);
  apply_limit(ch);
}

double check_setpoint(const InstrumentState& state, const ChannelState& ch, double volts) {
  if (!std::isfinite(volts) || !ch.limits.contains(volts) || volts < state.config.dac.v_refn ||
      volts > state.config.dac.v_refp) {
    throw RangeError("setpoint outside channel limits");
  }
  return volts;
}

std::uint64_t ramp_step_count(double from, double target, double rate) {
  const double ticks = std::abs(target - from) / (rate * kRampInterval);
  return static_cast<std::uint64_t>(std::ceil(ticks - 1e-9));
}

double ramp_value_at(const Ramp& r, std::uint64_t tick) {
  if (tick >= r.steps) return r.target;
  const double direction = r.target >= r.from ? 1.0 : -1.0;
  return r.from + direction * r.rate * kRampInterval * static_cast<double>(tick);
}

// ---- protocol parsing ----

struct SyntaxError {};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw SyntaxError{};
  return v;
}

long long parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw SyntaxError{};
  return v;
}

int parse_channel(std::string_view s) {
  const long long ch = parse_int(s);
  if (ch != 1 && ch != 2) throw ChannelError("channel must be 1 or 2");
  return static_cast<int>(ch);
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void expect_args(const std::vector<std::string_view>& tok, std::size_t n) {
  if (tok.size() != n + 1) throw SyntaxError{};
}

std::string format_measurement(const Trace& trace) {
  std::string out = "OK " + std::to_string(trace.size());
  out.reserve(out.size() + trace.size() * 24 + 4);
  char buf[40];
  for (double v : trace.samples) {
    std::snprintf(buf, sizeof buf, "\n%.17g", v);
    out += buf;
  }
  out += "\nEND";
  return out;
}

std::string_view strip_terminator(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  return line;
}

struct ParsedMeasure {
  int ch;
  double fs;
  std::size_t n;
};

ParsedMeasure parse_measure(const std::vector<std::string_view>& tok) {
  expect_args(tok, 3);
  const int ch = parse_channel(tok[1]);
  const double fs = parse_double(tok[2]);
  const long long n = parse_int(tok[3]);
  if (!(fs > 0.0) || !std::isfinite(fs) || n < 2 || static_cast<std::size_t>(n) > kMaxMeasureSamples) {
    throw RangeError("MEAS arguments out of range");
  }
  return {ch, fs, static_cast<std::size_t>(n)};
}

// Dispatches everything except MEAS. Returns the reply.
std::string dispatch(InstrumentState& state, const std::vector<std::string_view>& tok) {
  const std::string verb = upper(tok[0]);
  if (verb == "*IDN?") {
    expect_args(tok, 0);
    return state.config.identity;
  }
  if (verb == "SET") {
    expect_args(tok, 2);
    const int ch = parse_channel(tok[1]);
    return "OK " + format("%.6f", set_voltage(state, ch, parse_double(tok[2])));
  }
  if (verb == "GET") {
    expect_args(tok, 1);
    return format("%.9g", state.channel(parse_channel(tok[1])).applied_v);
  }
  if (verb == "RAMP") {
    expect_args(tok, 3);
    const int ch = parse_channel(tok[1]);
    ramp(state, ch, parse_double(tok[2]), parse_double(tok[3]));
    return "OK";
  }
  if (verb == "STAT") {
    expect_args(tok, 1);
    const auto& ch = state.channel(parse_channel(tok[1]));
    return std::string(to_string(ch.mode)) + " " + format("%.9g", ch.applied_v) + " " +
           format("%.9g", ch.current());
  }
  if (verb == "RLOAD") {
    expect_args(tok, 2);
    const int ch = parse_channel(tok[1]);
    const std::string arg = upper(tok[2]);
    set_load(state, ch, arg == "INF" ? std::numeric_limits<double>::infinity() : parse_double(tok[2]));
    return "OK";
  }
  if (verb == "ADV") {
    expect_args(tok, 1);
    const double dt = parse_double(tok[1]);
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw RangeError("ADV needs a non-negative interval");
    advance_to(state, state.uptime + dt);
    return "OK " + format("%.17g", state.uptime);
  }
  if (verb == "UPTIME?") {
    expect_args(tok, 0);
    return format("%.17g", state.uptime);
  }
  if (verb == "SAVE") {
    expect_args(tok, 1);
    try {
      save_state(std::filesystem::path(std::string(tok[1])), state);
    } catch (const std::exception&) {
      return "ERR IO";
    }
    return "OK";
  }
  if (verb == "LOAD") {
    expect_args(tok, 1);
    try {
      state = load_state(std::filesystem::path(std::string(tok[1])));
    } catch (const std::exception&) {
      return "ERR IO";
    }
    return "OK";
  }
  throw SyntaxError{};
}

template <typename F>
std::string guarded(F&& body) {
  try {
    return body();
  } catch (const SyntaxError&) {
    return "ERR SYNTAX";
  } catch (const ChannelError&) {
    return "ERR CHAN";
  } catch (const RangeError&) {
    return "ERR RANGE";
  } catch (const DomainError&) {
    return "ERR RANGE";
  }
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::kConstantCurrent ? "CC" : "CV"; }

InstrumentState InstrumentState::power_on(const InstrumentConfig& config) {
  config.validate();
  InstrumentState state;
  state.config = config;
  const double v0 = std::clamp(0.0, config.dac.v_refn, config.dac.v_refp);
  for (std::size_t i = 0; i < state.channels.size(); ++i) {
    auto& ch = state.channels[i];
    ch.limits = config.limits;
    ch.rms_alpha = config.rms_alpha;
    ch.seed = make_engine(config.seed, stream::kDrift, i + 1)();
    ch.drift_engine = make_engine(ch.seed, stream::kDrift);
    ch.drift_v = config.drift.sigma * unit_normal(ch.drift_engine);
    apply_code(config, ch, dac::voltage_to_code(config.dac, v0));
  }
  return state;
}

ChannelState& InstrumentState::channel(int ch) {
  if (ch != 1 && ch != 2) throw ChannelError("channel must be 1 or 2");
  return channels[static_cast<std::size_t>(ch - 1)];
}

const ChannelState& InstrumentState::channel(int ch) const {
  if (ch != 1 && ch != 2) throw ChannelError("channel must be 1 or 2");
  return channels[static_cast<std::size_t>(ch - 1)];
}

double set_voltage(InstrumentState& state, int ch, double volts) {
  auto& channel = state.channel(ch);
  check_setpoint(state, channel, volts);
  apply_code(state.config, channel, dac::voltage_to_code(state.config.dac, volts));
  channel.ramp.reset();
  return channel.applied_v;
}

void set_load(InstrumentState& state, int ch, double ohms) {
  auto& channel = state.channel(ch);
  if (!(ohms > 0.0)) throw RangeError("load must be positive");
  channel.load_ohms = ohms;
  apply_limit(channel);
}

RampEvent ramp(InstrumentState& state, int ch, double target, double rate) {
  auto& channel = state.channel(ch);
  check_setpoint(state, channel, target);
  if (!(rate > 0.0) || !std::isfinite(rate)) throw RangeError("ramp rate must be positive");

  const auto target_code = dac::voltage_to_code(state.config.dac, target);
  if (target_code == channel.code) {
    channel.ramp.reset();
    apply_code(state.config, channel, target_code);
    return {};
  }
  Ramp r{channel.setpoint_v, dac::code_to_voltage(state.config.dac, target_code), rate, state.uptime, 0};
  r.steps = ramp_step_count(r.from, r.target, rate);
  channel.ramp = r;
  return {r.steps, static_cast<double>(r.steps) * kRampInterval};
}

std::vector<double> ramp_setpoints(const dac::DacTransfer& dac, double from, double target,
                                   double rate) {
  if (!(rate > 0.0)) throw RangeError("ramp rate must be positive");
  const double quantized_target = dac::code_to_voltage(dac, dac::voltage_to_code(dac, target));
  const Ramp r{from, quantized_target, rate, 0.0, ramp_step_count(from, quantized_target, rate)};
  std::vector<double> out;
  out.reserve(r.steps);
  for (std::uint64_t k = 1; k <= r.steps; ++k) {
    out.push_back(dac::code_to_voltage(dac, dac::voltage_to_code(dac, ramp_value_at(r, k))));
  }
  return out;
}

void advance_to(InstrumentState& state, double uptime) {
  if (!(uptime > state.uptime)) return;
  const double dt = uptime - state.uptime;
  for (auto& ch : state.channels) {
    ch.drift_v = noise::ou_advance(state.config.drift, ch.drift_v, dt, unit_normal(ch.drift_engine));
    if (!ch.ramp) continue;
    const auto& r = *ch.ramp;
    const auto tick = static_cast<std::uint64_t>(std::floor((uptime - r.start_time) / kRampInterval + 1e-9));
    if (tick == 0) continue;
    const double v = ramp_value_at(r, tick);
    apply_code(state.config, ch, dac::voltage_to_code(state.config.dac, v));
    if (tick >= r.steps) ch.ramp.reset();
  }
  state.uptime = uptime;
}

MeasurementPlan plan_measurement(InstrumentState& state, int ch, double fs, std::size_t n) {
  auto& channel = state.channel(ch);
  const auto& other = state.channel(ch == 1 ? 2 : 1);
  if (!(fs > 0.0) || n < 2) throw DomainError("measurement needs fs > 0 and n >= 2");

  const double setpoint_asd =
      channel.rms_alpha * std::abs(channel.applied_v) / std::sqrt(state.config.rms_reference_bw);
  MeasurementPlan plan;
  plan.noise = state.config.noise.with_added_white(setpoint_asd);
  plan.fs = fs;
  plan.n = n;
  plan.noise_seed = make_engine(channel.seed, stream::kNoisePhase, channel.measurements)();
  // Crosstalk couples the aggressor's excursion from its power-on value of 0 V.
  plan.dc = channel.applied_v + channel.drift_v +
            noise::crosstalk_delta(state.config.crosstalk, other.applied_v);
  plan.t0 = state.uptime;
  ++channel.measurements;
  return plan;
}

Trace render_measurement(const MeasurementPlan& plan) {
  Trace trace = noise::synthesize_noise(plan.noise, plan.fs, plan.n, plan.noise_seed);
  trace.t0 = plan.t0;
  for (double& v : trace.samples) v += plan.dc;
  return trace;
}

Trace measure_trace(InstrumentState& state, int ch, double fs, std::size_t n) {
  return render_measurement(plan_measurement(state, ch, fs, n));
}

// ---- persistence ----

namespace {

constexpr const char* kSchema = "qpower-twin-state";
constexpr int kSchemaVersion = 1;

std::string engine_to_string(const std::mt19937_64& e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

std::mt19937_64 engine_from_string(const std::string& s) {
  std::istringstream is(s);
  std::mt19937_64 e;
  is >> e;
  if (is.fail()) throw SchemaError("malformed RNG state");
  return e;
}

}  // namespace

nlohmann::json snapshot_json(const InstrumentState& state) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& ch : state.channels) {
    nlohmann::json ramp_json = nullptr;
    if (ch.ramp) {
      ramp_json = {{"from", ch.ramp->from},
                   {"target", ch.ramp->target},
                   {"rate", ch.ramp->rate},
                   {"start_time", ch.ramp->start_time},
                   {"steps", ch.ramp->steps}};
    }
    channels.push_back({
        {"code", ch.code.value()},
        {"limits", {{"v_min", ch.limits.v_min}, {"v_max", ch.limits.v_max}, {"i_max", ch.limits.i_max}}},
        {"load_ohms", std::isinf(ch.load_ohms) ? nlohmann::json(nullptr) : nlohmann::json(ch.load_ohms)},
        {"drift_v", ch.drift_v},
        {"drift_engine", engine_to_string(ch.drift_engine)},
        {"seed", ch.seed},
        {"rms_alpha", ch.rms_alpha},
        {"measurements", ch.measurements},
        {"ramp", ramp_json},
    });
  }
  return {{"schema", kSchema},
          {"version", kSchemaVersion},
          {"config", state.config},
          {"uptime", state.uptime},
          {"channels", channels}};
}

InstrumentState state_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("schema", "") != kSchema) throw SchemaError("not a twin snapshot");
    if (j.at("version").get<int>() != kSchemaVersion) throw SchemaError("unsupported snapshot version");
    InstrumentState state = InstrumentState::power_on(j.at("config").get<InstrumentConfig>());
    state.uptime = j.at("uptime").get<double>();
    const auto& channels = j.at("channels");
    if (!channels.is_array() || channels.size() != state.channels.size()) {
      throw SchemaError("snapshot must hold exactly two channels");
    }
    for (std::size_t i = 0; i < state.channels.size(); ++i) {
      const auto& cj = channels[i];
      auto& ch = state.channels[i];
      const auto& lj = cj.at("limits");
      ch.limits = {lj.at("v_min").get<double>(), lj.at("v_max").get<double>(), lj.at("i_max").get<double>()};
      ch.limits.validate();
      ch.load_ohms = cj.at("load_ohms").is_null() ? std::numeric_limits<double>::infinity()
                                                   : cj.at("load_ohms").get<double>();
      if (!(ch.load_ohms > 0.0)) throw SchemaError("load must be positive");
      ch.drift_v = cj.at("drift_v").get<double>();
      ch.drift_engine = engine_from_string(cj.at("drift_engine").get<std::string>());
      ch.seed = cj.at("seed").get<std::uint64_t>();
      ch.rms_alpha = cj.at("rms_alpha").get<double>();
      ch.measurements = cj.at("measurements").get<std::uint64_t>();
      const auto code = cj.at("code").get<std::uint32_t>();
      if (code > dac::kMaxCode) throw SchemaError("DAC code out of range");
      apply_code(state.config, ch, dac::Code{code});
      ch.ramp.reset();
      if (!cj.at("ramp").is_null()) {
        const auto& rj = cj.at("ramp");
        ch.ramp = Ramp{rj.at("from").get<double>(), rj.at("target").get<double>(),
                       rj.at("rate").get<double>(), rj.at("start_time").get<double>(),
                       rj.at("steps").get<std::uint64_t>()};
      }
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("snapshot: ") + e.what());
  } catch (const std::logic_error& e) {
    throw SchemaError(std::string("snapshot: ") + e.what());
  }
}

void save_state(const std::filesystem::path& path, const InstrumentState& state) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write snapshot " + path.string());
  os << snapshot_json(state).dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

InstrumentState load_state(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open snapshot " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("snapshot " + path.string() + ": " + e.what());
  }
  return state_from_json(j);
}

// ---- command application ----

std::string apply_command(InstrumentState& state, std::string_view raw) {
  if (raw.size() > kMaxLineBytes) return "ERR SYNTAX";
  const auto tok = split(strip_terminator(raw));
  if (tok.empty()) return "ERR SYNTAX";
  InstrumentState work = state;
  std::string reply = guarded([&] {
    if (upper(tok[0]) == "MEAS") {
      const auto m = parse_measure(tok);
      return format_measurement(measure_trace(work, m.ch, m.fs, m.n));
    }
    return dispatch(work, tok);
  });
  if (reply.rfind("ERR", 0) != 0) state = std::move(work);
  return reply;
}

// ---- clock ----

Clock::Clock(double scale) : scale_(scale), base_wall_(std::chrono::steady_clock::now()) {}

double Clock::now() const {
  if (is_manual()) return base_uptime_;
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - base_wall_;
  return base_uptime_ + scale_ * elapsed.count();
}

void Clock::rebase(double uptime) {
  base_uptime_ = uptime;
  base_wall_ = std::chrono::steady_clock::now();
}

// ---- instrument ----

Instrument::Instrument(const InstrumentConfig& config, Clock clock)
    : Instrument(InstrumentState::power_on(config), clock) {}

Instrument::Instrument(InstrumentState state, Clock clock) : state_(std::move(state)), clock_(clock) {
  clock_.rebase(state_.uptime);
}

void Instrument::sync_clock() {
  const double t = clock_.now();
  if (t > state_.uptime) advance_to(state_, t);
}

std::string Instrument::execute(std::string_view line) {
  std::optional<MeasurementPlan> plan;
  std::size_t journal_slot = 0;
  bool journaled = false;
  std::string reply;
  {
    std::lock_guard lock(mutex_);
    sync_clock();
    const auto tok = split(strip_terminator(line));
    if (line.size() <= kMaxLineBytes && !tok.empty() && upper(tok[0]) == "MEAS") {
      reply = guarded([&] {
        const auto m = parse_measure(tok);
        plan = plan_measurement(state_, m.ch, m.fs, m.n);
        return std::string();
      });
    } else {
      reply = apply_command(state_, line);
    }
    clock_.rebase(state_.uptime);
    journaled = journal_enabled_;
    if (journaled) {
      journal_slot = journal_.size();
      journal_.push_back({sequence_, std::string(strip_terminator(line)), reply});
    }
    ++sequence_;
  }
  if (plan) {
    reply = format_measurement(render_measurement(*plan));
    if (journaled) {
      std::lock_guard lock(mutex_);
      if (journal_slot < journal_.size()) journal_[journal_slot].reply = reply;
    }
  }
  return reply;
}

InstrumentState Instrument::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

void Instrument::set_journal(bool enabled) {
  std::lock_guard lock(mutex_);
  journal_enabled_ = enabled;
  journal_.clear();
}

std::vector<JournalEntry> Instrument::journal() const {
  std::lock_guard lock(mutex_);
  return journal_;
}

}  // namespace qpower::twin
