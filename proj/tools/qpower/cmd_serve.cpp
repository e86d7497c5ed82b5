#include <csignal>
#include <cstdio>
#include <memory>

#include <CLI11.hpp>

#include "common.hpp"
#include "qpower/errors.hpp"
#include "qpower/server.hpp"

namespace qpower::cli {

namespace {

struct ServeOptions {
  TwinSource source;
  std::uint16_t port = twin::kDefaultPort;
  std::string bind = "127.0.0.1";
  std::string clock = "realtime";
  double accelerate = 1.0;
  std::string state_path;
  bool journal = false;
};

void serve(const ServeOptions& opts) {
  if (!opts.source.connect.empty()) throw DomainError("serve does not take --connect");
  if (!(opts.accelerate > 0.0)) throw DomainError("--accelerate must be positive");
  const auto clock = opts.clock == "manual" ? twin::Clock::manual() : twin::Clock::realtime(opts.accelerate);

  std::unique_ptr<twin::Instrument> instrument;
  if (!opts.state_path.empty()) {
    instrument = std::make_unique<twin::Instrument>(twin::load_state(opts.state_path), clock);
  } else {
    instrument = std::make_unique<twin::Instrument>(resolve_config(opts.source), clock);
  }
  instrument->set_journal(opts.journal);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  twin::TcpServer server(*instrument, opts.port, opts.bind);
  server.start();
  std::printf("listening on %s:%u\n", opts.bind.c_str(), static_cast<unsigned>(server.port()));
  std::fflush(stdout);

  int received = 0;
  sigwait(&signals, &received);
  server.stop();
  std::printf("stopped\n");
}

}  // namespace

void register_serve(CLI::App& app) {
  auto opts = std::make_shared<ServeOptions>();
  auto* cmd = app.add_subcommand("serve", "Run the twin as a TCP instrument server");
  add_twin_options(*cmd, opts->source);
  cmd->add_option("--port", opts->port, "TCP port (0 picks a free port)")->capture_default_str();
  cmd->add_option("--bind", opts->bind, "Bind address")->capture_default_str();
  cmd->add_option("--clock", opts->clock, "Instrument clock")
      ->check(CLI::IsMember({"realtime", "manual"}))
      ->capture_default_str();
  cmd->add_option("--accelerate", opts->accelerate, "Simulated seconds per wall second (realtime clock)")
      ->capture_default_str();
  cmd->add_option("--state", opts->state_path, "Start from a saved state snapshot");
  cmd->add_flag("--journal", opts->journal, "Keep an in-memory command journal");
  cmd->callback([opts] { serve(*opts); });
}

}  // namespace qpower::cli
