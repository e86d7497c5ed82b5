#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "qpower/dac.hpp"
#include "qpower/noise.hpp"

namespace qpower::twin {

// Everything needed to power on a twin: one JSON document on disk.
struct InstrumentConfig {
  dac::DacTransfer dac;
  dac::ChannelLimits limits;
  noise::AsdModel noise = noise::default_output_noise();
  noise::DriftModel drift;
  noise::CrosstalkModel crosstalk;
  // Setpoint-proportional noise: rms_alpha * |V| spread white over
  // rms_reference_bw.
  double rms_alpha = 45.4e-6;
  double rms_reference_bw = 20e6;
  std::uint64_t seed = 1;
  std::string identity = "QPOWER-TWIN,2CH,1.0";

  void validate() const;
};

void to_json(nlohmann::json& j, const InstrumentConfig& c);
// Missing keys keep their defaults; wrong types raise SchemaError.
void from_json(const nlohmann::json& j, InstrumentConfig& c);

InstrumentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const InstrumentConfig& c);

}  // namespace qpower::twin
