#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qpower: dual-channel precision DC source twin and bench harness"};
  app.require_subcommand(1);
  qpower::cli::register_serve(app);
  qpower::cli::register_bench(app);
  qpower::cli::register_bode(app);
  qpower::cli::register_monitor(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qpower: %s\n", e.what());
    return 1;
  }
  return 0;
}
