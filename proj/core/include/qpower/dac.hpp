#pragma once

#include <compare>
#include <cstdint>

namespace qpower::dac {

using Volts = double;

inline constexpr int kBits = 20;
inline constexpr std::uint32_t kMaxCode = (1u << kBits) - 1u;

// 20-bit register value written to the DAC.
class Code {
 public:
  constexpr Code() = default;
  constexpr explicit Code(std::uint32_t raw) : raw_(raw) {}
  constexpr std::uint32_t value() const { return raw_; }
  friend constexpr auto operator<=>(Code, Code) = default;

 private:
  std::uint32_t raw_ = 0;
};

// Reference pair of the DAC. V_out = (refp - refn) * D / (2^20 - 1) + refn.
struct DacTransfer {
  Volts v_refp = 7.0;
  Volts v_refn = -7.0;

  Volts span() const { return v_refp - v_refn; }
  // Throws RangeError unless v_refp > v_refn and both are finite.
  void validate() const;
};

struct ReferenceModel {
  Volts nominal = 7.2;
  double tempco_ppm_per_c = 0.05;
  double asd = 1.2e-6;  // V/sqrt(Hz), flat

  void validate() const;
};

struct ChannelLimits {
  Volts v_min = -7.0;
  Volts v_max = 7.0;
  double i_max = 0.2;  // A

  void validate() const;
  bool contains(Volts v) const { return v >= v_min && v <= v_max; }
};

// Exact at both endpoints and monotone in the code.
Volts code_to_voltage(const DacTransfer& cfg, Code code);

// Nearest code; an exact half-LSB tie resolves to the even code.
Code voltage_to_code(const DacTransfer& cfg, Volts v);

Volts lsb(const DacTransfer& cfg);

// Reference output shift for a temperature excursion dT (degrees C).
Volts reference_shift(const ReferenceModel& ref, double delta_t);

}  // namespace qpower::dac
