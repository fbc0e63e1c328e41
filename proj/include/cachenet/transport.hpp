// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cachenet/codec.hpp"
#include "cachenet/server.hpp"

namespace cachenet {

// One request/response frame channel. send/recv return false on a lost or
// closed transport; the caller decides whether to reconnect and retry.
class Connection {
 public:
  virtual ~Connection() = default;
  virtual bool send(const WireMessage& m) = 0;
  virtual bool recv(WireMessage& out) = 0;
  // Re-establishes a lost transport where that is possible. In-process
  // channels are never lost; sockets re-dial.
  virtual bool reconnect() = 0;
};

// Loopback transport for single-process runs. Requests and responses still
// travel as encoded bytes through FrameParser on both sides, so the codec
// path matches the socket transport byte for byte.
class InProcessConnection final : public Connection {
 public:
  explicit InProcessConnection(const EdgeServer& server) : server_(server) {}

  bool send(const WireMessage& m) override;
  bool recv(WireMessage& out) override;
  bool reconnect() override { return true; }

 private:
  const EdgeServer& server_;
  FrameParser server_rx_;  // device -> server byte stream
  FrameParser client_rx_;  // server -> device byte stream
};

// Dial/backoff schedule shared by socket connects and per-frame retries:
// up to max_attempts tries, sleeping initial_backoff, 2x, 4x, ... between.
struct RetryPolicy {
  std::size_t max_attempts = 4;
  std::chrono::milliseconds initial_backoff{25};
};

// TCP client side. Frames are written whole; reads are reassembled by a
// FrameParser, so any read chunking yields the same messages.
class SocketConnection final : public Connection {
 public:
  // Dials host:port under the policy; nullptr when every attempt fails.
  static std::unique_ptr<SocketConnection> dial(const std::string& host,
                                                std::uint16_t port,
                                                const RetryPolicy& retry = {});
  ~SocketConnection() override;
  SocketConnection(const SocketConnection&) = delete;
  SocketConnection& operator=(const SocketConnection&) = delete;

  bool send(const WireMessage& m) override;
  bool recv(WireMessage& out) override;
  // Closes the current socket (if any) and re-dials under the same policy,
  // discarding any partially received bytes.
  bool reconnect() override;

 private:
  SocketConnection(std::string host, std::uint16_t port, RetryPolicy retry);
  bool connect_once();

  std::string host_;
  std::uint16_t port_;
  RetryPolicy retry_;
  int fd_ = -1;
  FrameParser rx_;
};

// TCP edge endpoint: accepts connections on 127.0.0.1 and serves each on
// its own thread against a shared read-only EdgeServer. Every response is
// written as one whole frame on that connection's socket, so concurrent
// devices never observe interleaved bytes.
class SocketServer {
 public:
  // Binds the port (0 picks an ephemeral one; see port()) and starts the
  // accept loop. Throws TransportError when the socket cannot be set up.
  SocketServer(const EdgeServer& server, std::uint16_t port = 0);
  ~SocketServer();
  SocketServer(const SocketServer&) = delete;
  SocketServer& operator=(const SocketServer&) = delete;

  std::uint16_t port() const { return port_; }
  // Stops accepting, unblocks in-flight reads, and joins all threads.
  void stop();

 private:
  void accept_loop(int lfd);
  void serve_connection(int fd);

  const EdgeServer& server_;
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;                   // guards workers_ and conn_fds_
  std::vector<std::thread> workers_;
  std::vector<int> conn_fds_;       // live connection sockets, for shutdown
};

}  // namespace cachenet
