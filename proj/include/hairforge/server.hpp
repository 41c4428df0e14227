#pragma once

// Network front of the session service: WebSocket /ws (JSON text commands and
// events, binary frame packets) plus HTTP GET /healthz, /styles and
// /styles/{id}/thumbnail. Every WebSocket connection owns one Session and one
// fixed-rate loop thread; when a frame overruns its budget the missed display
// frames are skipped rather than simulated late.

#include "hairforge/session.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace hairforge::service {

struct ServerConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  double frame_hz = 60.0;
  std::size_t max_message_bytes = 1 << 20;
};

struct ServerStats {
  std::uint64_t connections = 0;     // WebSocket sessions accepted
  std::uint64_t open = 0;            // currently open
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_skipped = 0;  // replaced in the write queue by a newer frame
  std::uint64_t frames_dropped = 0;  // display frames skipped after an overrun
};

// GET response for an HTTP path; exposed so routing is testable offline.
struct HttpReply {
  int status = 200;
  std::string content_type;
  std::string body;
};
HttpReply route_http(const ServiceContext& ctx, const std::string& method, const std::string& target);

class Server {
 public:
  Server(std::shared_ptr<const ServiceContext> ctx, ServerConfig cfg);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts serving on a background thread; returns the bound port.
  // Throws IoError when the address cannot be bound.
  unsigned short start();

  // Closes every connection and joins all threads. Idempotent.
  void stop();

  ServerStats stats() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace hairforge::service
