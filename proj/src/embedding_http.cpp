#include "hairforge/retrieval.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace hairforge::retrieval {

using json = nlohmann::json;

namespace {

std::vector<Eigen::VectorXd> parse_vectors(const std::string& body, std::size_t count, int dim) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("embedding response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("vectors") || !doc["vectors"].is_array()) {
    throw Error(ErrorCode::MalformedResponse, "embedding response lacks a 'vectors' array");
  }
  if (doc.contains("dim") && (!doc["dim"].is_number_integer() || doc["dim"].get<long long>() != dim)) {
    throw Error(ErrorCode::MalformedResponse, "embedding service reports dim " + doc["dim"].dump() +
                                                  ", expected " + std::to_string(dim));
  }
  const auto& rows = doc["vectors"];
  if (rows.size() != count) {
    throw Error(ErrorCode::MalformedResponse, "embedding service returned " + std::to_string(rows.size()) +
                                                  " vectors for " + std::to_string(count) + " texts");
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != static_cast<std::size_t>(dim)) {
      throw Error(ErrorCode::MalformedResponse, "embedding vector has the wrong length");
    }
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) {
      const auto& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) throw Error(ErrorCode::MalformedResponse, "embedding vector holds a non-number");
      v(j) = x.get<double>();
    }
    if (!v.allFinite()) throw Error(ErrorCode::MalformedResponse, "embedding vector is not finite");
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

std::vector<Eigen::VectorXd> HttpEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
  const std::string body = json{{"texts", texts}}.dump();
  httplib::Client client(cfg_.host, cfg_.port);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(cfg_.timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  std::string last_error = "no attempt made";
  double backoff = cfg_.backoff_s;
  const int attempts = std::max(cfg_.attempts, 1);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (auto res = client.Post(cfg_.path, body, "application/json")) {
      if (res->status == 200) return parse_vectors(res->body, texts.size(), cfg_.dim);
      last_error = "HTTP " + std::to_string(res->status);
      // client errors will not improve on retry
      if (res->status < 500) break;
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
  }
  throw Error(ErrorCode::ProviderUnavailable, "embedding service " + cfg_.host + ":" +
                                                  std::to_string(cfg_.port) + cfg_.path + " failed: " + last_error);
}

}  // namespace hairforge::retrieval
