#pragma once

#include "kinetunnel/config.hpp"
#include "kinetunnel/trajectory_io.hpp"

#include <cstdint>
#include <memory>

namespace kinetunnel {

/// Session service: one Session per connection.
///
/// The TCP listener speaks newline-delimited JSON. The WebSocket listener
/// carries the same messages, one per text frame. Every inbound and outbound
/// message is appended to the session log when `server.log_path` is set.
class Server {
 public:
  Server(ServiceConfig config, TrajectoryLibrary library);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting. Port 0 in the config picks a free port.
  void start();
  /// Closes listeners and connections, then flushes the log.
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  std::uint16_t tcp_port() const;
  /// 0 when the WebSocket listener is disabled.
  std::uint16_t ws_port() const;
  std::size_t connections_accepted() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kinetunnel
