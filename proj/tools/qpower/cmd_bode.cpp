#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <CLI11.hpp>

#include "common.hpp"
#include "qpower/analog_chain.hpp"
#include "qpower/errors.hpp"

namespace qpower::cli {

namespace {

struct BodeOptions {
  std::string tf_path;
  std::string out_path;
  std::string report_path;
  double f_min = 1.0;
  double f_max = 1e9;
  std::size_t points = 1001;
  std::optional<double> tune_pm;
  std::optional<double> tune_ugbw;
};

void bode(const BodeOptions& opts) {
  if (!(opts.f_min > 0.0 && opts.f_max > opts.f_min) || opts.points < 2) {
    throw DomainError("bode needs 0 < f-min < f-max and at least two points");
  }
  if (opts.tune_pm.has_value() != opts.tune_ugbw.has_value()) {
    throw DomainError("--tune-pm and --tune-ugbw go together");
  }
  std::ifstream in(opts.tf_path);
  if (!in) throw IoError("cannot read " + opts.tf_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("transfer function: ") + e.what());
  }
  auto tf = doc.get<analog::PoleZeroGain>();

  nlohmann::json report{{"open_loop", tf}};
  try {
    report["stability"] = analog::stability_report(tf);
  } catch (const NotApplicableError& e) {
    report["stability"] = nullptr;
    report["stability_error"] = e.what();
  }
  if (opts.tune_pm) {
    const auto comp = analog::tune_compensation(tf, *opts.tune_pm, *opts.tune_ugbw);
    tf = analog::apply_compensation(tf, comp);
    report["compensation"] = comp;
    report["compensated"] = analog::stability_report(tf);
  }

  if (const auto parent = std::filesystem::path(opts.out_path).parent_path(); !parent.empty()) {
    ensure_directory(parent);
  }
  std::FILE* csv = std::fopen(opts.out_path.c_str(), "w");
  if (csv == nullptr) throw IoError("cannot write " + opts.out_path);
  std::fprintf(csv, "f_hz,mag_db,phase_deg\n");
  const double ratio = std::log(opts.f_max / opts.f_min) / static_cast<double>(opts.points - 1);
  for (std::size_t i = 0; i < opts.points; ++i) {
    const double f = opts.f_min * std::exp(ratio * static_cast<double>(i));
    const auto r = analog::response(tf, f);
    std::fprintf(csv, "%.9g,%.9g,%.9g\n", f, r.magnitude_db, r.phase_deg);
  }
  const bool ok = std::ferror(csv) == 0;
  std::fclose(csv);
  if (!ok) throw IoError("write failed for " + opts.out_path);

  std::string report_path = opts.report_path;
  if (report_path.empty()) report_path = std::filesystem::path(opts.out_path).replace_extension(".json").string();
  write_json(report_path, report);
  std::printf("%s\n", report.dump(2).c_str());
}

}  // namespace

void register_bode(CLI::App& app) {
  auto opts = std::make_shared<BodeOptions>();
  auto* cmd = app.add_subcommand("bode", "Bode response and stability report of a pole/zero transfer function");
  cmd->add_option("--tf", opts->tf_path, "Transfer function JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", opts->out_path, "CSV output (f_hz, mag_db, phase_deg)")->required();
  cmd->add_option("--report", opts->report_path, "Stability report JSON (default: next to --out)");
  cmd->add_option("--f-min", opts->f_min, "Lowest frequency [Hz]")->capture_default_str();
  cmd->add_option("--f-max", opts->f_max, "Highest frequency [Hz]")->capture_default_str();
  cmd->add_option("--points", opts->points, "Log-spaced frequency points")->capture_default_str();
  cmd->add_option("--tune-pm", opts->tune_pm, "Fit a lead network for this phase margin [deg]");
  cmd->add_option("--tune-ugbw", opts->tune_ugbw, "Fit a lead network for this unity-gain bandwidth [Hz]");
  cmd->callback([opts] { bode(*opts); });
}

}  // namespace qpower::cli
