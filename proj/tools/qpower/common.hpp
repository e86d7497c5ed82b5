#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "qpower/config.hpp"
#include "qpower/handle.hpp"
#include "qpower/instrument.hpp"
#include "qpower/trace.hpp"

namespace CLI {
class App;
}

namespace qpower::cli {

// Where a subcommand gets its instrument from: a remote server when
// `connect` is set, otherwise an in-process twin built from `config`.
struct TwinSource {
  std::string config_path;
  std::string connect;  // host:port
  std::optional<std::uint64_t> seed;
  bool spurs = false;   // add the example spur table to the noise model
};

void add_twin_options(CLI::App& cmd, TwinSource& source);

twin::InstrumentConfig resolve_config(const TwinSource& source);

class TwinSession {
 public:
  TwinSession(const TwinSource& source, twin::Clock clock);
  InstrumentHandle& handle() { return *handle_; }
  std::uint64_t seed() const { return seed_; }
  nlohmann::json describe() const;

 private:
  std::unique_ptr<twin::Instrument> local_;
  std::unique_ptr<InstrumentHandle> handle_;
  std::uint64_t seed_ = 0;
  std::string endpoint_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void ensure_directory(const std::filesystem::path& dir);

void register_serve(CLI::App& app);
void register_bench(CLI::App& app);
void register_bode(CLI::App& app);
void register_monitor(CLI::App& app);

}  // namespace qpower::cli
