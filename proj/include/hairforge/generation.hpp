#pragma once

// Client side of edge-conditioned image generation. The heavy lifting happens
// in an external service; this module ships requests to it one at a time.

#include "hairforge/imaging.hpp"

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <variant>

namespace hairforge::generation {

inline constexpr int kDefaultSize = 512;
inline constexpr int kMinSize = 64;

struct GenerationRequest {
  imaging::EdgeMap edge_map;
  std::string prompt;
  std::uint64_t seed = 0;
  int width = kDefaultSize;
  int height = kDefaultSize;
};

// Throws InvalidArgument (empty prompt or edge map, size below 64).
void validate(const GenerationRequest& req);

struct ImageResult {
  std::vector<std::uint8_t> png;
  double latency_s = 0.0;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual ImageResult generate(const GenerationRequest& req) = 0;
};

struct HttpGenerationConfig {
  std::string host = "127.0.0.1";
  int port = 8091;
  std::string path = "/generate";
  double timeout_s = 120.0;
};

// POST {path} as multipart: edge (image/png), prompt, seed, width, height.
// Throws ServiceUnavailable (unreachable or HTTP error), Timeout,
// MalformedResponse (body is not a PNG).
class HttpGenerationClient final : public GenerationBackend {
 public:
  explicit HttpGenerationClient(HttpGenerationConfig cfg) : cfg_(std::move(cfg)) {}
  ImageResult generate(const GenerationRequest& req) override;

 private:
  HttpGenerationConfig cfg_;
};

// In-process stand-in: answers every request with the same PNG after an
// optional delay, and records the prompts it saw.
class MockGenerationBackend final : public GenerationBackend {
 public:
  explicit MockGenerationBackend(std::vector<std::uint8_t> png, double delay_s = 0.0)
      : png_(std::move(png)), delay_s_(delay_s) {}
  ImageResult generate(const GenerationRequest& req) override;
  std::vector<std::string> prompts() const;

 private:
  std::vector<std::uint8_t> png_;
  double delay_s_;
  mutable std::mutex mu_;
  std::vector<std::string> prompts_;
};

// The PNG the mock hands back by default: a small gradient.
std::vector<std::uint8_t> placeholder_png(int width = 64, int height = 64);

using GenerationOutcome = std::variant<ImageResult, Error>;

// Single worker, FIFO. At most one request is in flight; the rest wait.
// Callbacks run on the worker thread.
class GenerationQueue {
 public:
  using Callback = std::function<void(std::uint64_t ticket, GenerationOutcome outcome)>;
  using StartCallback = std::function<void(std::uint64_t ticket)>;

  explicit GenerationQueue(std::shared_ptr<GenerationBackend> backend);
  ~GenerationQueue();
  GenerationQueue(const GenerationQueue&) = delete;
  GenerationQueue& operator=(const GenerationQueue&) = delete;

  // Validates, enqueues and returns a ticket (1, 2, ...). Throws InvalidArgument.
  // `started` runs on the worker just before the backend is called.
  std::uint64_t submit(GenerationRequest req, Callback done, StartCallback started = {});

  std::size_t waiting() const;  // queued behind the in-flight request
  bool busy() const;            // a request is in flight

  // Blocks until nothing is queued or in flight.
  void drain();

 private:
  struct Job {
    std::uint64_t ticket;
    GenerationRequest req;
    Callback done;
    StartCallback started;
  };
  void run();

  std::shared_ptr<GenerationBackend> backend_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Job> jobs_;
  bool busy_ = false;
  bool stop_ = false;
  std::uint64_t next_ticket_ = 1;
  std::thread worker_;
};

}  // namespace hairforge::generation
