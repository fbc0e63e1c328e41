// SPDX-License-Identifier: Apache-2.0
#include "cachenet/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <utility>

#include "cachenet/errors.hpp"

namespace cachenet {

namespace {

// Writes the whole frame or reports failure; handles partial ::send calls.
bool write_frame(int fd, const WireMessage& m) {
  const std::vector<std::uint8_t> bytes = encode_message(m);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n =
        ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

// Reads until the parser yields one frame. false on close/error; a sticky
// parser status other than kOk also ends the stream (length-prefixed
// framing cannot resynchronize after corruption).
bool read_frame(int fd, FrameParser& rx, WireMessage& out, DecodeStatus* status = nullptr) {
  for (;;) {
    const DecodeStatus st = rx.try_extract(out);
    if (status != nullptr) *status = st;
    if (st == DecodeStatus::kOk) return true;
    if (st != DecodeStatus::kNeedMoreData) return false;
    std::uint8_t buf[4096];
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    rx.feed({buf, static_cast<std::size_t>(n)});
  }
}

}  // namespace

bool InProcessConnection::send(const WireMessage& m) {
  server_rx_.feed(encode_message(m));
  WireMessage req;
  while (server_rx_.try_extract(req) == DecodeStatus::kOk)
    client_rx_.feed(encode_message(server_.handle(req)));
  return true;
}

bool InProcessConnection::recv(WireMessage& out) {
  return client_rx_.try_extract(out) == DecodeStatus::kOk;
}

SocketConnection::SocketConnection(std::string host, std::uint16_t port,
                                   RetryPolicy retry)
    : host_(std::move(host)), port_(port), retry_(retry) {}

SocketConnection::~SocketConnection() {
  if (fd_ >= 0) ::close(fd_);
}

bool SocketConnection::connect_once() {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port_);
  if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) return false;

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return false;
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return false;
  }
  fd_ = fd;
  rx_ = FrameParser{};
  return true;
}

std::unique_ptr<SocketConnection> SocketConnection::dial(
    const std::string& host, std::uint16_t port, const RetryPolicy& retry) {
  std::unique_ptr<SocketConnection> conn(new SocketConnection(host, port, retry));
  if (!conn->reconnect()) return nullptr;
  return conn;
}

bool SocketConnection::reconnect() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  auto backoff = retry_.initial_backoff;
  for (std::size_t attempt = 0; attempt < retry_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    if (connect_once()) return true;
  }
  return false;
}

bool SocketConnection::send(const WireMessage& m) {
  return fd_ >= 0 && write_frame(fd_, m);
}

bool SocketConnection::recv(WireMessage& out) {
  return fd_ >= 0 && read_frame(fd_, rx_, out);
}

SocketServer::SocketServer(const EdgeServer& server, std::uint16_t port)
    : server_(server) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    ::close(listen_fd_);
    throw TransportError("bind/listen failed on port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  if (::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(listen_fd_);
    throw TransportError("getsockname failed");
  }
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this, lfd = listen_fd_] { accept_loop(lfd); });
}

SocketServer::~SocketServer() { stop(); }

void SocketServer::accept_loop(int lfd) {
  for (;;) {
    const int fd = ::accept(lfd, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;  // listener closed by stop()
    }
    if (stopping_.load()) {
      ::close(fd);
      return;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard<std::mutex> lock(mu_);
    conn_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void SocketServer::serve_connection(int fd) {
  FrameParser rx;
  for (;;) {
    WireMessage req;
    DecodeStatus st = DecodeStatus::kOk;
    if (!read_frame(fd, rx, req, &st)) {
      // A corrupted or oversize stream gets one ERROR, then the link drops;
      // a plain close/reset just drops.
      if (st != DecodeStatus::kOk && st != DecodeStatus::kNeedMoreData)
        write_frame(fd, {MsgType::kError,
                         encode_error({kErrMalformed, decode_status_name(st)})});
      break;
    }
    if (!write_frame(fd, server_.handle(req))) break;
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    conn_fds_.erase(std::remove(conn_fds_.begin(), conn_fds_.end(), fd),
                    conn_fds_.end());
  }
  ::close(fd);
}

void SocketServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_.store(true);
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (acceptor_.joinable()) acceptor_.join();

  // Unblock workers still reading; they close their own sockets on exit.
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mu_);
    workers.swap(workers_);
  }
  for (std::thread& t : workers)
    if (t.joinable()) t.join();
}

}  // namespace cachenet
