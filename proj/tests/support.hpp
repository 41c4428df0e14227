#pragma once

// Shared helpers for the unit and acceptance suites.

#include "hairforge/imaging.hpp"
#include "hairforge/session.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hftest {

std::string data_path(const std::string& name);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Fixture database styles with the strand count of every recipe scaled down.
std::vector<hairforge::Hairstyle> small_styles(int strands_per_style);

// Context over small_styles with the hashing provider and a mock generator.
std::shared_ptr<hairforge::service::ServiceContext> small_context(int strands_per_style = 120,
                                                                  double generation_delay_s = 0.0);

struct CannyCase {
  double sigma, low, high;
  hairforge::imaging::GrayImage image;
  hairforge::imaging::GrayImage edges;
};
std::vector<CannyCase> load_canny_oracle();

struct WsMessage {
  bool binary = false;
  std::string bytes;
};

// Minimal blocking WebSocket client.
class WsClient {
 public:
  explicit WsClient(unsigned short port);
  ~WsClient();
  void send_text(const std::string& text);
  void send_binary(const std::string& bytes);
  // Nothing when the timeout passes; throws when the connection fails.
  std::optional<WsMessage> read(std::chrono::milliseconds timeout);
  bool is_open() const;
  void close();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

struct HttpResult {
  int status = 0;
  std::string content_type;
  std::string body;
};
HttpResult http_get(unsigned short port, const std::string& target);

}  // namespace hftest
