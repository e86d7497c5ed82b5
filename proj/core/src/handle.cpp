#include "qpower/handle.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "qpower/errors.hpp"
#include "qpower/instrument.hpp"

namespace qpower {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find('\n', start);
    if (pos == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

bool is_measure(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  if (line.size() - i < 4) return false;
  for (std::size_t k = 0; k < 4; ++k) {
    if (std::toupper(static_cast<unsigned char>(line[i + k])) != "MEAS"[k]) return false;
  }
  return line.size() == i + 4 || std::isspace(static_cast<unsigned char>(line[i + 4]));
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ProtocolError("unparseable reply: " + s);
  return v;
}

const std::string& expect_ok(const std::vector<std::string>& reply) {
  if (reply.empty()) throw ProtocolError("empty reply");
  if (reply.front().rfind("ERR", 0) == 0) throw ProtocolError(reply.front());
  return reply.front();
}

double ok_value(const std::vector<std::string>& reply) {
  const auto& line = expect_ok(reply);
  if (line.rfind("OK ", 0) != 0) throw ProtocolError("expected 'OK <value>', got " + line);
  return parse_number(line.substr(3));
}

std::string format_request(const char* fmt, int ch, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, fmt, ch, a, b);
  return buf;
}

}  // namespace

std::vector<std::string> LocalHandle::transact(std::string_view line) {
  return split_lines(instrument_.execute(line));
}

TcpHandle::TcpHandle(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &result); rc != 0) {
    throw IoError("resolve " + host + ": " + ::gai_strerror(rc));
  }
  for (auto* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(result);
  if (fd_ < 0) throw IoError("cannot connect to " + host + ":" + service);
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpHandle::~TcpHandle() {
  if (fd_ >= 0) ::close(fd_);
}

std::string TcpHandle::read_line() {
  while (true) {
    const auto pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    char buf[65536];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw IoError("connection closed by instrument");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

std::vector<std::string> TcpHandle::transact(std::string_view line) {
  std::string request(line);
  request += '\n';
  std::string_view rest = request;
  while (!rest.empty()) {
    const ssize_t n = ::send(fd_, rest.data(), rest.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw IoError("send to instrument failed");
    rest.remove_prefix(static_cast<std::size_t>(n));
  }
  std::vector<std::string> reply{read_line()};
  if (is_measure(line) && reply.front().rfind("OK ", 0) == 0) {
    while (true) {
      reply.push_back(read_line());
      if (reply.back() == "END") break;
    }
  }
  return reply;
}

namespace remote {

std::string identify(InstrumentHandle& h) { return expect_ok(h.transact("*IDN?")); }

double set_voltage(InstrumentHandle& h, int channel, double volts) {
  return ok_value(h.transact(format_request("SET %d %.17g", channel, volts)));
}

double get_voltage(InstrumentHandle& h, int channel) {
  return parse_number(expect_ok(h.transact("GET " + std::to_string(channel))));
}

void ramp(InstrumentHandle& h, int channel, double volts, double rate) {
  expect_ok(h.transact(format_request("RAMP %d %.17g %.17g", channel, volts, rate)));
}

Trace measure(InstrumentHandle& h, int channel, double fs, std::size_t n) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "MEAS %d %.17g %zu", channel, fs, n);
  const auto reply = h.transact(buf);
  const auto count = static_cast<std::size_t>(ok_value(reply));
  if (reply.size() != count + 2 || reply.back() != "END") throw ProtocolError("truncated MEAS reply");
  Trace trace{fs, 0.0, {}};
  trace.samples.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) trace.samples.push_back(parse_number(reply[i]));
  return trace;
}

void set_load(InstrumentHandle& h, int channel, double ohms) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "RLOAD %d %.17g", channel, ohms);
  expect_ok(h.transact(std::isinf(ohms) ? "RLOAD " + std::to_string(channel) + " INF" : std::string(buf)));
}

double advance(InstrumentHandle& h, double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "ADV %.17g", seconds);
  return ok_value(h.transact(buf));
}

}  // namespace remote

}  // namespace qpower
