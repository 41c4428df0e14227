#pragma once

// Text-guided hairstyle retrieval. Captions and queries are embedded into
// unit vectors; relevance is the matrix-vector product of the stacked
// caption embeddings with the query embedding.

#include "hairforge/error.hpp"
#include "hairforge/model.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hairforge::retrieval {

inline constexpr int kDefaultDim = 512;
inline constexpr int kDefaultTopK = 3;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TextEmbedding {
  Eigen::VectorXd vector;
  std::string provider_id;

  int dim() const { return static_cast<int>(vector.size()); }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  // One raw (not necessarily normalized) vector per text.
  virtual std::vector<Eigen::VectorXd> embed_batch(const std::vector<std::string>& texts) = 0;
};

// Offline provider: lowercase, split on non-alphanumerics, signed-hash each
// token into `dim` buckets, weight by 1/sqrt(token count).
class HashingProvider final : public EmbeddingProvider {
 public:
  explicit HashingProvider(int dim = kDefaultDim) : dim_(dim) {}
  std::string id() const override { return "fallback-hash-" + std::to_string(dim_); }
  int dim() const override { return dim_; }
  std::vector<Eigen::VectorXd> embed_batch(const std::vector<std::string>& texts) override;

 private:
  int dim_;
};

// Client for an external embedding service:
//   POST {path}  {"texts": [...]}  ->  {"dim": D, "vectors": [[...], ...]}
// Transport failures and 5xx answers are retried with doubling back-off, then
// surface as ProviderUnavailable; wrong shapes as MalformedResponse.
struct HttpProviderConfig {
  std::string host = "127.0.0.1";
  int port = 8090;
  std::string path = "/embed";
  std::string provider_id = "http-embed";
  int dim = kDefaultDim;
  int attempts = 3;
  double timeout_s = 10.0;
  double backoff_s = 0.2;
};

class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {}
  std::string id() const override { return cfg_.provider_id; }
  int dim() const override { return cfg_.dim; }
  std::vector<Eigen::VectorXd> embed_batch(const std::vector<std::string>& texts) override;

 private:
  HttpProviderConfig cfg_;
};

std::vector<std::string> tokenize(const std::string& text);

// Unit embedding. Throws EmptyText when nothing embeddable remains.
TextEmbedding embed_text(const std::string& text, EmbeddingProvider& provider);

struct EmbeddingIndex {
  RowMatrix matrix;  // N x D, unit rows
  std::vector<std::string> ids;
  std::string provider_id;

  int size() const { return static_cast<int>(ids.size()); }
  int dim() const { return static_cast<int>(matrix.cols()); }
};

// Throws DuplicateId; provider failures are rethrown naming the caption id.
EmbeddingIndex build_index(const std::vector<std::pair<std::string, std::string>>& captioned,
                           EmbeddingProvider& provider);

struct ScoredId {
  std::string id;
  double score = 0.0;
};

struct SimilarityResult {
  std::vector<ScoredId> entries;  // non-increasing score, ties by ascending id
};

// Order of the k best entries of `scores`: descending score, then ascending id.
template <typename Derived>
std::vector<int> top_k_order(const Eigen::MatrixBase<Derived>& scores, const std::vector<std::string>& ids,
                             int k) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto better = [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)];
  };
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  order.resize(take);
  return order;
}

// Throws ProviderMismatch, DimensionMismatch, InvalidArgument (k < 1).
SimilarityResult retrieve_top_k(const EmbeddingIndex& index, const TextEmbedding& query,
                                int k = kDefaultTopK);

struct Intent {
  enum class Kind { retrieve, wind, simulate, render, unknown };
  Kind kind = Kind::unknown;
  std::string query;                // retrieve
  bool on = true;                   // wind, simulate
  std::optional<double> strength;   // wind, cm/s
  RenderAttributes attributes;      // render
  std::string raw;
};

// Keyword rules, case-insensitive, first match wins: wind words, then
// stop/freeze + sim (and start/run/resume + sim), then render words, else
// retrieval. Blank text yields unknown.
Intent route_intent(const std::string& text);

std::string_view to_string(Intent::Kind kind);

}  // namespace hairforge::retrieval
