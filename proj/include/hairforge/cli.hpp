#pragma once

// Command-line entry points: grow, simulate, retrieve, bench, edges, index,
// validate, fixtures and serve.

#include "hairforge/session.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hairforge::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,       // bad flags
  kRuntime = 2,     // IO, service, numerical failures
  kValidation = 3,  // input data or parameters rejected
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Exit code for an engine error.
int exit_code_for(ErrorCode code);

struct BenchRow {
  int strands = 0;
  int vertices = 0;
  std::size_t particles = 0;
  int frames = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

// Wall time of `frames` display frames of a benchmark style, after `warmup`
// frames that are not measured.
BenchRow bench(int strands, int vertices, int frames, int warmup = 5);

std::string bench_csv_header();
std::string to_csv(const BenchRow& row);

struct Endpoint {
  std::string host;
  int port = 80;
  std::string path = "/";
};

// "http://host[:port][/path]"; throws InvalidArgument.
Endpoint parse_url(const std::string& url);

// Embedding provider for "fallback", "fallback-hash-<dim>" or an http URL.
std::shared_ptr<retrieval::EmbeddingProvider> make_provider(const std::string& name);

struct ServeOptions {
  std::optional<std::string> assets;  // database directory; built-in fixtures when absent
  std::optional<std::string> index;   // index file; built in memory when absent
  std::string embed = "fallback";
  std::string gen = "mock";
};

// Loads styles, index and thumbnails and wires the provider and generator.
std::shared_ptr<service::ServiceContext> make_context(const ServeOptions& opts, std::ostream& log);

}  // namespace hairforge::cli
