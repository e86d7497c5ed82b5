#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qpower/trace.hpp"

namespace qpower {

namespace twin {
class Instrument;
}

// Request/response link to one instrument. One request at a time per handle.
class InstrumentHandle {
 public:
  virtual ~InstrumentHandle() = default;
  // Sends one command line (without terminator) and returns every reply line.
  virtual std::vector<std::string> transact(std::string_view line) = 0;
};

// In-process link straight into an Instrument's command queue.
class LocalHandle final : public InstrumentHandle {
 public:
  explicit LocalHandle(twin::Instrument& instrument) : instrument_(instrument) {}
  std::vector<std::string> transact(std::string_view line) override;

 private:
  twin::Instrument& instrument_;
};

// TCP link to a running twin server.
class TcpHandle final : public InstrumentHandle {
 public:
  TcpHandle(const std::string& host, std::uint16_t port);
  ~TcpHandle() override;
  TcpHandle(const TcpHandle&) = delete;
  TcpHandle& operator=(const TcpHandle&) = delete;

  std::vector<std::string> transact(std::string_view line) override;

 private:
  std::string read_line();

  int fd_ = -1;
  std::string buffer_;
};

// Typed wrappers over the wire grammar. ERR replies raise ProtocolError.
namespace remote {

std::string identify(InstrumentHandle& h);
double set_voltage(InstrumentHandle& h, int channel, double volts);
double get_voltage(InstrumentHandle& h, int channel);
void ramp(InstrumentHandle& h, int channel, double volts, double rate);
Trace measure(InstrumentHandle& h, int channel, double fs, std::size_t n);
void set_load(InstrumentHandle& h, int channel, double ohms);
// Advances the instrument clock; only meaningful with an accelerated clock.
double advance(InstrumentHandle& h, double seconds);

}  // namespace remote

}  // namespace qpower
