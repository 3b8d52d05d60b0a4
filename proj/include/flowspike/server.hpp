#pragma once

// Live event-stream inference over TCP. Clients send frames of
// (u32 n, then n 10-byte EVT1 records); the server aggregates them into
// fixed-width windows, runs one forward pass per completed window on a
// connection-private model replica, and replies with
// (u32 0x464C4F57, u16 width, u16 height, interleaved float32 u,v).
// Malformed input produces an error frame (u32 0x45525221, u16 code) and
// the connection is closed. All integers little-endian.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "flowspike/network.hpp"

namespace flowspike {

constexpr std::uint32_t kFlowMarker = 0x464C4F57;  // "FLOW"
constexpr std::uint32_t kErrMarker = 0x45525221;   // "ERR!"

enum ServerErrCode : std::uint16_t {
  kErrFrameTooLarge = 1,
  kErrBadRecord = 2,
  kErrTimestampOrder = 3,
};

constexpr std::uint32_t kMaxFrameEvents = 1u << 22;

class TcpEventServer {
 public:
  // Binds and listens on the port (0 picks an ephemeral port). The model is
  // the template replicated per connection; window_us is the aggregation
  // width in microseconds.
  TcpEventServer(Model model, int port, std::int64_t window_us);
  ~TcpEventServer();

  TcpEventServer(const TcpEventServer&) = delete;
  TcpEventServer& operator=(const TcpEventServer&) = delete;

  void start();
  void stop();
  int port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(int fd);

  Model model_;
  std::int64_t window_us_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::thread> conns_;
  std::vector<int> conn_fds_;
};

}  // namespace flowspike
