#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace qpower {

// Uniformly sampled voltage record.
struct Trace {
  double fs = 1.0;  // Hz
  double t0 = 0.0;  // s
  std::vector<double> samples;

  void validate() const;
  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / fs; }
  double mean() const;
};

// CSV layout: "# fs=<Hz> unit=V t0=<s>" header, then one sample per line.
void write_trace_csv(std::ostream& os, const Trace& trace);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);
Trace read_trace_csv(std::istream& is);
Trace read_trace_csv(const std::filesystem::path& path);

}  // namespace qpower
