#include "qpower/config.hpp"

#include <fstream>

#include "qpower/errors.hpp"

namespace qpower::twin {

namespace {

template <typename T>
void read_if_present(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void InstrumentConfig::validate() const {
  dac.validate();
  limits.validate();
  noise.validate();
  drift.validate();
  crosstalk.validate();
  if (!(rms_alpha >= 0.0)) throw DomainError("rms_alpha must be non-negative");
  if (!(rms_reference_bw > 0.0)) throw DomainError("rms_reference_bw must be positive");
}

void to_json(nlohmann::json& j, const InstrumentConfig& c) {
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : c.noise.white_segments) {
    segments.push_back({{"f_lo", s.f_lo}, {"f_hi", s.f_hi}, {"asd", s.asd}});
  }
  nlohmann::json spurs = nlohmann::json::array();
  for (const auto& s : c.noise.spurs) spurs.push_back({{"freq", s.freq}, {"amplitude", s.amplitude}});

  j = nlohmann::json{
      {"dac", {{"v_refp", c.dac.v_refp}, {"v_refn", c.dac.v_refn}, {"bits", dac::kBits}}},
      {"limits", {{"v_min", c.limits.v_min}, {"v_max", c.limits.v_max}, {"i_max", c.limits.i_max}}},
      {"noise", {{"white_segments", segments}, {"flicker_coeff", c.noise.flicker_coeff}, {"spurs", spurs}}},
      {"drift", {{"sigma", c.drift.sigma}, {"tau", c.drift.tau}}},
      {"crosstalk", {{"kappa", c.crosstalk.kappa}}},
      {"rms_alpha", c.rms_alpha},
      {"rms_reference_bw", c.rms_reference_bw},
      {"seed", c.seed},
      {"identity", c.identity},
  };
}

void from_json(const nlohmann::json& j, InstrumentConfig& c) {
  try {
    if (!j.is_object()) throw SchemaError("config must be a JSON object");
    if (j.contains("dac")) {
      const auto& d = j.at("dac");
      read_if_present(d, "v_refp", c.dac.v_refp);
      read_if_present(d, "v_refn", c.dac.v_refn);
      if (d.contains("bits") && d.at("bits").get<int>() != dac::kBits) {
        throw SchemaError("only 20-bit DACs are modeled");
      }
    }
    if (j.contains("limits")) {
      const auto& l = j.at("limits");
      read_if_present(l, "v_min", c.limits.v_min);
      read_if_present(l, "v_max", c.limits.v_max);
      read_if_present(l, "i_max", c.limits.i_max);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      if (n.contains("white_segments")) {
        c.noise.white_segments.clear();
        for (const auto& s : n.at("white_segments")) {
          c.noise.white_segments.push_back(
              {s.at("f_lo").get<double>(), s.at("f_hi").get<double>(), s.at("asd").get<double>()});
        }
      }
      read_if_present(n, "flicker_coeff", c.noise.flicker_coeff);
      if (n.contains("spurs")) {
        c.noise.spurs.clear();
        for (const auto& s : n.at("spurs")) {
          c.noise.spurs.push_back({s.at("freq").get<double>(), s.at("amplitude").get<double>()});
        }
      }
    }
    if (j.contains("drift")) {
      read_if_present(j.at("drift"), "sigma", c.drift.sigma);
      read_if_present(j.at("drift"), "tau", c.drift.tau);
    }
    if (j.contains("crosstalk")) read_if_present(j.at("crosstalk"), "kappa", c.crosstalk.kappa);
    read_if_present(j, "rms_alpha", c.rms_alpha);
    read_if_present(j, "rms_reference_bw", c.rms_reference_bw);
    read_if_present(j, "seed", c.seed);
    read_if_present(j, "identity", c.identity);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const std::logic_error& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

InstrumentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("config " + path.string() + ": " + e.what());
  }
  return j.get<InstrumentConfig>();
}

void save_config(const std::filesystem::path& path, const InstrumentConfig& c) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config " + path.string());
  os << nlohmann::json(c).dump(2) << '\n';
}

}  // namespace qpower::twin
