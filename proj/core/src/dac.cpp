#include "qpower/dac.hpp"

#include <cmath>
#include <string>

#include "qpower/errors.hpp"

namespace qpower::dac {

namespace {

constexpr long double kMaxCodeL = static_cast<long double>(kMaxCode);

}  // namespace

void DacTransfer::validate() const {
  if (!std::isfinite(v_refp) || !std::isfinite(v_refn) || !(v_refp > v_refn)) {
    throw RangeError("DAC references must satisfy v_refp > v_refn");
  }
}

void ReferenceModel::validate() const {
  if (!(tempco_ppm_per_c >= 0.0) || !(asd >= 0.0)) {
    throw RangeError("reference tempco and asd must be non-negative");
  }
}

void ChannelLimits::validate() const {
  if (!(v_min < v_max)) throw RangeError("channel limits need v_min < v_max");
  if (!(i_max > 0.0)) throw RangeError("channel current limit must be positive");
}

Volts code_to_voltage(const DacTransfer& cfg, Code code) {
  if (code.value() > kMaxCode) {
    throw RangeError("DAC code " + std::to_string(code.value()) + " exceeds 2^20 - 1");
  }
  // std::lerp is exact at t = 0 and t = 1 and monotone in t.
  const long double t = static_cast<long double>(code.value()) / kMaxCodeL;
  return static_cast<Volts>(std::lerp(static_cast<long double>(cfg.v_refn),
                                      static_cast<long double>(cfg.v_refp), t));
}

Code voltage_to_code(const DacTransfer& cfg, Volts v) {
  if (!(v >= cfg.v_refn && v <= cfg.v_refp)) {
    throw RangeError("voltage outside DAC reference span");
  }
  const long double span = static_cast<long double>(cfg.v_refp) - cfg.v_refn;
  const long double x = (static_cast<long double>(v) - cfg.v_refn) / span * kMaxCodeL;
  const long double base = std::floor(x);
  const long double frac = x - base;
  auto code = static_cast<std::uint32_t>(base);
  if (frac > 0.5L || (frac == 0.5L && (code & 1u) != 0u)) ++code;
  if (code > kMaxCode) code = kMaxCode;
  return Code{code};
}

Volts lsb(const DacTransfer& cfg) {
  cfg.validate();
  return static_cast<Volts>((static_cast<long double>(cfg.v_refp) - cfg.v_refn) / kMaxCodeL);
}

Volts reference_shift(const ReferenceModel& ref, double delta_t) {
  return ref.nominal * ref.tempco_ppm_per_c * 1e-6 * delta_t;
}

}  // namespace qpower::dac
