#include "flowspike/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "flowspike/event_file.hpp"
#include "flowspike/training.hpp"

namespace flowspike {

namespace {

bool read_full(int fd, void* buf, std::size_t n) {
  auto* p = static_cast<unsigned char*>(buf);
  while (n > 0) {
    ssize_t r = ::recv(fd, p, n, 0);
    if (r <= 0) return false;
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

bool write_full(int fd, const void* buf, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(buf);
  while (n > 0) {
    ssize_t r = ::send(fd, p, n, MSG_NOSIGNAL);
    if (r <= 0) return false;
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void send_error(int fd, std::uint16_t code) {
  std::vector<unsigned char> frame;
  put_u32(frame, kErrMarker);
  put_u16(frame, code);
  write_full(fd, frame.data(), frame.size());
}

}  // namespace

TcpEventServer::TcpEventServer(Model model, int port, std::int64_t window_us)
    : model_(std::move(model)), window_us_(window_us) {
  if (window_us_ <= 0) throw validation_error("server: window_us must be positive");

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw io_error("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(listen_fd_);
    throw io_error("bind() failed on port " + std::to_string(port));
  }
  if (::listen(listen_fd_, 16) < 0) {
    ::close(listen_fd_);
    throw io_error("listen() failed");
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpEventServer::~TcpEventServer() { stop(); }

void TcpEventServer::start() {
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void TcpEventServer::stop() {
  if (!running_.exchange(false)) {
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    return;
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> conns;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    conns.swap(conns_);
  }
  for (auto& t : conns)
    if (t.joinable()) t.join();
}

void TcpEventServer::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) break;  // listener closed
    std::lock_guard<std::mutex> lock(mu_);
    conn_fds_.push_back(fd);
    conns_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void TcpEventServer::serve_connection(int fd) {
  // connection-private replica: shared nothing, fresh zero state
  Model model = model_.clone();
  NoGradGuard ng;

  const int w = model.width, h = model.height;
  std::vector<Event> pending;
  std::int64_t cur_window = -1;  // window index of the events in `pending`
  std::int64_t prev_t = -1;

  auto infer_and_reply = [&](std::int64_t k) -> bool {
    EventWindow win;
    win.events = std::move(pending);
    pending.clear();
    win.t0 = k * window_us_;
    win.t1 = (k + 1) * window_us_;
    win.width = w;
    win.height = h;
    auto out = forward(model, encode_for(model, win));
    auto fv = out.flow.value();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<unsigned char> frame;
    frame.reserve(8 + plane * 8);
    put_u32(frame, kFlowMarker);
    put_u16(frame, static_cast<std::uint16_t>(w));
    put_u16(frame, static_cast<std::uint16_t>(h));
    for (std::size_t i = 0; i < plane; ++i) {
      std::uint32_t a, b;
      float u = fv[i], v = fv[plane + i];
      std::memcpy(&a, &u, 4);
      std::memcpy(&b, &v, 4);
      put_u32(frame, a);
      put_u32(frame, b);
    }
    return write_full(fd, frame.data(), frame.size());
  };

  std::vector<unsigned char> buf;
  bool ok = true;
  while (ok) {
    unsigned char nb[4];
    if (!read_full(fd, nb, 4)) break;  // clean end of stream
    std::uint32_t n = static_cast<std::uint32_t>(nb[0]) | (static_cast<std::uint32_t>(nb[1]) << 8) |
                      (static_cast<std::uint32_t>(nb[2]) << 16) |
                      (static_cast<std::uint32_t>(nb[3]) << 24);
    if (n > kMaxFrameEvents) {
      send_error(fd, kErrFrameTooLarge);
      break;
    }
    buf.resize(static_cast<std::size_t>(n) * kEventRecordBytes);
    if (n && !read_full(fd, buf.data(), buf.size())) break;

    for (std::uint32_t i = 0; i < n && ok; ++i) {
      Event e = decode_event_record(buf.data() + static_cast<std::size_t>(i) * kEventRecordBytes);
      if (e.x >= w || e.y >= h || (e.p != 1 && e.p != -1)) {
        send_error(fd, kErrBadRecord);
        ok = false;
        break;
      }
      if (e.t < prev_t) {
        send_error(fd, kErrTimestampOrder);
        ok = false;
        break;
      }
      prev_t = e.t;
      std::int64_t k = e.t / window_us_;
      if (cur_window < 0) cur_window = k;
      while (k > cur_window && ok) {
        ok = infer_and_reply(cur_window);  // also flushes empty gap windows
        ++cur_window;
      }
      if (ok) pending.push_back(e);
    }
  }
  ::close(fd);
}

}  // namespace flowspike
