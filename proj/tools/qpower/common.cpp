#include "common.hpp"

#include <fstream>

#include <CLI11.hpp>

#include "qpower/errors.hpp"
#include "qpower/noise.hpp"

namespace qpower::cli {

void add_twin_options(CLI::App& cmd, TwinSource& source) {
  cmd.add_option("--config", source.config_path, "Instrument configuration JSON");
  cmd.add_option("--connect", source.connect, "Use a running twin at host:port instead of an in-process one");
  cmd.add_option("--seed", source.seed, "Override the configuration seed");
  cmd.add_flag("--spurs", source.spurs, "Add the example spur table to the noise model");
}

twin::InstrumentConfig resolve_config(const TwinSource& source) {
  twin::InstrumentConfig config;
  if (!source.config_path.empty()) config = twin::load_config(source.config_path);
  if (source.seed) config.seed = *source.seed;
  if (source.spurs) {
    const auto extra = noise::example_spur_table();
    config.noise.spurs.insert(config.noise.spurs.end(), extra.begin(), extra.end());
  }
  config.validate();
  return config;
}

TwinSession::TwinSession(const TwinSource& source, twin::Clock clock) {
  if (source.connect.empty()) {
    const auto config = resolve_config(source);
    seed_ = config.seed;
    local_ = std::make_unique<twin::Instrument>(config, clock);
    handle_ = std::make_unique<LocalHandle>(*local_);
    endpoint_ = "in-process";
    return;
  }
  if (source.spurs || !source.config_path.empty()) {
    throw DomainError("--config and --spurs apply to in-process twins only");
  }
  const auto colon = source.connect.rfind(':');
  if (colon == std::string::npos) throw DomainError("--connect expects host:port");
  const auto port = std::stoul(source.connect.substr(colon + 1));
  if (port == 0 || port > 65535) throw DomainError("--connect port out of range");
  handle_ = std::make_unique<TcpHandle>(source.connect.substr(0, colon), static_cast<std::uint16_t>(port));
  seed_ = source.seed.value_or(0);
  endpoint_ = source.connect;
}

nlohmann::json TwinSession::describe() const {
  return {{"endpoint", endpoint_}, {"seed", seed_}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace qpower::cli
