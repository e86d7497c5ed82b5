#include "qpower/trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "qpower/errors.hpp"

namespace qpower {

void Trace::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw DomainError("trace sample rate must be positive");
  if (samples.empty()) throw DomainError("trace must hold at least one sample");
}

double Trace::mean() const {
  if (samples.empty()) return 0.0;
  return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
}

void write_trace_csv(std::ostream& os, const Trace& trace) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", trace.fs);
  os << "# fs=" << buf;
  std::snprintf(buf, sizeof buf, "%.17g", trace.t0);
  os << " unit=V t0=" << buf << '\n';
  for (double v : trace.samples) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_trace_csv(os, trace);
  if (!os) throw IoError("write failed: " + path.string());
}

Trace read_trace_csv(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("# ", 0) != 0) {
    throw SchemaError("trace CSV must start with a '# fs=... unit=V t0=...' header");
  }
  Trace trace;
  bool have_fs = false;
  std::istringstream fields(header.substr(2));
  std::string field;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (key == "fs") {
        trace.fs = std::stod(value);
        have_fs = true;
      } else if (key == "t0") {
        trace.t0 = std::stod(value);
      } else if (key == "unit" && value != "V") {
        throw SchemaError("unsupported trace unit " + value);
      }
    } catch (const std::logic_error&) {
      throw SchemaError("malformed trace header field " + field);
    }
  }
  if (!have_fs) throw SchemaError("trace header lacks fs");

  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      trace.samples.push_back(std::stod(line));
    } catch (const std::logic_error&) {
      throw SchemaError("malformed trace sample: " + line);
    }
  }
  trace.validate();
  return trace;
}

Trace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_trace_csv(is);
}

}  // namespace qpower
