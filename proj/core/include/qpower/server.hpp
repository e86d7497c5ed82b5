#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <mutex>
#include <string>
#include <thread>

#include "qpower/instrument.hpp"

namespace qpower::twin {

inline constexpr std::uint16_t kDefaultPort = 5025;

// Line-oriented TCP front end. One thread per client; all commands funnel
// into the instrument's serialized queue.
class TcpServer {
 public:
  TcpServer(Instrument& instrument, std::uint16_t port, std::string bind_address = "127.0.0.1");
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  void start();
  void stop();
  // Bound port; useful when constructed with port 0.
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve_client(int fd);

  Instrument& instrument_;
  std::uint16_t port_;
  std::string bind_address_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex clients_mutex_;
  std::list<std::thread> client_threads_;
  std::list<int> client_fds_;
};

}  // namespace qpower::twin
