#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <CLI11.hpp>

#include "common.hpp"
#include "qpower/errors.hpp"
#include "qpower/metrology.hpp"
#include "qpower/qubit.hpp"

namespace qpower::cli {

namespace {

struct MonitorCliOptions {
  TwinSource source;
  std::string out_dir;
  qubit::MonitorOptions monitor;
  bool no_dispersion = false;
  double hist_lo = 3.0e-6;
  double hist_hi = 6.0e-6;
  std::size_t hist_bins = 30;
};

void write_series(const std::filesystem::path& path, const qubit::MonitorResult& r) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw IoError("cannot write " + path.string());
  std::fprintf(f, "t_s,fringe_hz,t2r_s,fit_ok\n");
  std::size_t ok = 0;
  std::size_t failed = 0;
  while (ok < r.timestamps.size() || failed < r.failed_timestamps.size()) {
    const bool take_ok = failed >= r.failed_timestamps.size() ||
                         (ok < r.timestamps.size() && r.timestamps[ok] < r.failed_timestamps[failed]);
    if (take_ok) {
      std::fprintf(f, "%.9g,%.9g,%.9g,1\n", r.timestamps[ok], r.fringe_freq[ok], r.t2r[ok]);
      ++ok;
    } else {
      std::fprintf(f, "%.9g,,,0\n", r.failed_timestamps[failed]);
      ++failed;
    }
  }
  const bool good = std::ferror(f) == 0;
  std::fclose(f);
  if (!good) throw IoError("write failed for " + path.string());
}

nlohmann::json summarize(const qubit::MonitorResult& r, const MonitorCliOptions& opts) {
  nlohmann::json summary{{"records", r.timestamps.size()},
                         {"failed_fits", r.failed_timestamps.size()},
                         {"operating_bias_v", r.operating_bias},
                         {"sensitivity_hz_per_v", r.sensitivity}};
  if (r.fringe_freq.size() >= 2) {
    const Trace fringe{1.0, 0.0, r.fringe_freq};
    const Trace t2{1.0, 0.0, r.t2r};
    summary["fringe_pkpk_hz"] = metrology::peak_to_peak(fringe);
    summary["fringe_mean_hz"] = fringe.mean();
    summary["t2r_mean_s"] = t2.mean();
  }
  const auto inside = std::count_if(r.t2r.begin(), r.t2r.end(), [](double t) { return t >= 3.5e-6 && t <= 5.5e-6; });
  summary["t2r_fraction_3p5_to_5p5us"] =
      r.t2r.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(r.t2r.size());

  std::vector<std::size_t> counts(opts.hist_bins, 0);
  std::size_t below = 0;
  std::size_t above = 0;
  const double width = (opts.hist_hi - opts.hist_lo) / static_cast<double>(opts.hist_bins);
  for (double t : r.t2r) {
    if (t < opts.hist_lo) {
      ++below;
    } else if (t >= opts.hist_hi) {
      ++above;
    } else {
      ++counts[std::min(opts.hist_bins - 1, static_cast<std::size_t>((t - opts.hist_lo) / width))];
    }
  }
  nlohmann::json edges = nlohmann::json::array();
  for (std::size_t i = 0; i <= opts.hist_bins; ++i) edges.push_back(opts.hist_lo + width * static_cast<double>(i));
  summary["t2r_histogram"] = {{"edges_s", edges}, {"counts", counts}, {"below", below}, {"above", above}};
  return summary;
}

void run(MonitorCliOptions opts) {
  if (opts.hist_bins == 0 || !(opts.hist_hi > opts.hist_lo)) throw DomainError("bad histogram range");
  opts.monitor.dispersion.enabled = !opts.no_dispersion;
  const auto clock = opts.monitor.accelerate ? twin::Clock::manual() : twin::Clock::realtime(1.0);
  TwinSession session(opts.source, clock);
  opts.monitor.seed = session.seed();
  const auto model = qubit::default_qubit_model();
  for (const auto& w : model.validate()) std::fprintf(stderr, "warning: %s\n", w.c_str());

  const auto result = qubit::run_monitor(session.handle(), model, opts.monitor);
  const std::filesystem::path dir(opts.out_dir);
  ensure_directory(dir);
  write_series(dir / "monitor.csv", result);
  auto summary = summarize(result, opts);
  summary["twin"] = session.describe();
  summary["duration_s"] = opts.monitor.duration;
  summary["repetitions"] = opts.monitor.repetitions;
  summary["shots"] = opts.monitor.shots;
  write_json(dir / "monitor_summary.json", summary);
  std::printf("%s\n", summary.dump(2).c_str());
}

}  // namespace

void register_monitor(CLI::App& app) {
  auto opts = std::make_shared<MonitorCliOptions>();
  auto* cmd = app.add_subcommand("monitor", "Repeated Ramsey monitoring of a qubit biased by the twin");
  add_twin_options(*cmd, opts->source);
  auto& m = opts->monitor;
  cmd->add_option("--out", opts->out_dir, "Output directory")->required();
  cmd->add_option("--duration", m.duration, "Monitoring span [s]")->capture_default_str();
  cmd->add_option("--repetitions", m.repetitions, "Ramsey scans over the span")->capture_default_str();
  cmd->add_option("--shots", m.shots, "Shots per delay point (0 for ideal populations)")->capture_default_str();
  cmd->add_option("--channel", m.channel, "Bias channel")->check(CLI::Range(1, 2))->capture_default_str();
  cmd->add_option("--detuning", m.detuning, "Nominal Ramsey detuning [Hz]")->capture_default_str();
  cmd->add_option("--sensitivity", m.sensitivity, "Override |df/dV| at the operating point [Hz/V]");
  cmd->add_flag("--accelerate", m.accelerate, "Advance the instrument clock instead of waiting");
  cmd->add_flag("--no-dispersion", opts->no_dispersion, "Hold T2 fixed instead of drawing it per scan");
  cmd->add_option("--hist-bins", opts->hist_bins, "T2 histogram bins")->capture_default_str();
  m.accelerate = false;
  cmd->callback([opts] { run(*opts); });
}

}  // namespace qpower::cli
