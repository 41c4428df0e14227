#include "doctest.h"

#include "hairforge/retrieval.hpp"

#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <thread>

using namespace hairforge;
using namespace hairforge::retrieval;

namespace {

// Provider returning fixed vectors, for exact tie and shape tests.
class TableProvider final : public EmbeddingProvider {
 public:
  explicit TableProvider(std::map<std::string, Eigen::VectorXd> table, std::string id = "table")
      : table_(std::move(table)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  int dim() const override { return static_cast<int>(table_.begin()->second.size()); }
  std::vector<Eigen::VectorXd> embed_batch(const std::vector<std::string>& texts) override {
    std::vector<Eigen::VectorXd> out;
    for (const auto& t : texts) out.push_back(table_.at(t));
    return out;
  }

 private:
  std::map<std::string, Eigen::VectorXd> table_;
  std::string id_;
};

Eigen::VectorXd v2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

class FakeEmbedServer {
 public:
  explicit FakeEmbedServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/embed", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      handler(req, res);
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEmbedServer() {
    server_.stop();
    thread_.join();
  }
  HttpProviderConfig config(int dim) const {
    HttpProviderConfig c;
    c.port = port;
    c.dim = dim;
    c.backoff_s = 0.01;
    c.timeout_s = 2.0;
    return c;
  }
  int port = 0;
  std::atomic<int> hits{0};

 private:
  httplib::Server server_;
  std::thread thread_;
};

void answer_vectors(const httplib::Request& req, httplib::Response& res, int dim) {
  const auto doc = nlohmann::json::parse(req.body);
  nlohmann::json vecs = nlohmann::json::array();
  for (std::size_t i = 0; i < doc["texts"].size(); ++i) {
    std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
    v[i % static_cast<std::size_t>(dim)] = 2.0;
    vecs.push_back(v);
  }
  res.set_content(nlohmann::json{{"dim", dim}, {"vectors", vecs}}.dump(), "application/json");
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("tokenize lowercases and splits on punctuation") {
    CHECK(tokenize("Short, BOB-cut!  2A") == std::vector<std::string>{"short", "bob", "cut", "2a"});
    CHECK(tokenize("  ...  ").empty());
  }

  TEST_CASE("hashing embeddings are unit, deterministic and order-free") {
    HashingProvider p(64);
    const auto a = embed_text("long curly hair", p);
    const auto b = embed_text("hair curly LONG", p);
    CHECK(a.dim() == 64);
    CHECK(a.provider_id == "fallback-hash-64");
    CHECK(a.vector.norm() == doctest::Approx(1.0));
    CHECK((a.vector - b.vector).norm() < 1e-15);
  }

  TEST_CASE("blank and token-free text is rejected") {
    HashingProvider p(32);
    CHECK(code_of([&] { embed_text("   ", p); }) == ErrorCode::EmptyText);
    CHECK(code_of([&] { embed_text("?!", p); }) == ErrorCode::EmptyText);
  }

  TEST_CASE("index rows are unit and ids unique") {
    HashingProvider p(128);
    const auto idx = build_index({{"a", "short bob"}, {"b", "long curly"}}, p);
    CHECK(idx.size() == 2);
    CHECK(idx.dim() == 128);
    CHECK(idx.matrix.rowwise().norm().isApproxToConstant(1.0, 1e-12));
    CHECK(code_of([&] { build_index({{"a", "x"}, {"a", "y"}}, p); }) == ErrorCode::DuplicateId);
  }

  TEST_CASE("self query scores one and ranks first") {
    HashingProvider p(256);
    const auto idx = build_index({{"a", "short straight bob"}, {"b", "long curly waves"}, {"c", "buzz cut"}}, p);
    const auto r = retrieve_top_k(idx, embed_text("long curly waves", p), 3);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].id == "b");
    CHECK(r.entries[0].score == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t i = 1; i < r.entries.size(); ++i) CHECK(r.entries[i - 1].score >= r.entries[i].score);
  }

  TEST_CASE("ties break by ascending id and k clamps to the index size") {
    TableProvider p({{"q", v2(1, 0)}, {"x", v2(1, 0)}, {"y", v2(0, 1)}});
    EmbeddingIndex idx;
    idx.provider_id = "table";
    idx.ids = {"zeta", "alpha", "mid"};
    idx.matrix.resize(3, 2);
    idx.matrix << 1, 0, 1, 0, 0, 1;
    const auto r = retrieve_top_k(idx, embed_text("q", p), 10);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].id == "alpha");
    CHECK(r.entries[1].id == "zeta");
    CHECK(r.entries[2].id == "mid");
  }

  TEST_CASE("query errors") {
    HashingProvider p(16);
    const auto idx = build_index({{"a", "bob"}}, p);
    CHECK(code_of([&] { retrieve_top_k(idx, embed_text("bob", p), 0); }) == ErrorCode::InvalidArgument);
    HashingProvider other(32);
    CHECK(code_of([&] { retrieve_top_k(idx, embed_text("bob", other), 1); }) == ErrorCode::ProviderMismatch);
    auto q = embed_text("bob", p);
    q.vector = Eigen::VectorXd::Ones(8).normalized();
    CHECK(code_of([&] { retrieve_top_k(idx, q, 1); }) == ErrorCode::DimensionMismatch);
  }

  TEST_CASE("zero vectors from a provider are rejected") {
    TableProvider p({{"z", v2(0, 0)}});
    CHECK(code_of([&] { embed_text("z", p); }) == ErrorCode::EmptyText);
  }

  TEST_CASE("intent routing") {
    auto r = route_intent("create some wind?");
    CHECK(r.kind == Intent::Kind::wind);
    CHECK(r.on);
    r = route_intent("Stop the wind");
    CHECK(r.kind == Intent::Kind::wind);
    CHECK_FALSE(r.on);
    r = route_intent("breeze at 250 please");
    CHECK(r.strength.value_or(0.0) == 250.0);
    r = route_intent("pause the simulation");
    CHECK(r.kind == Intent::Kind::simulate);
    CHECK_FALSE(r.on);
    CHECK(route_intent("run sim").kind == Intent::Kind::simulate);
    CHECK(route_intent("render a photo in a park").kind == Intent::Kind::render);
    r = route_intent("short bob");
    CHECK(r.kind == Intent::Kind::retrieve);
    CHECK(r.query == "short bob");
    CHECK(route_intent("   ").kind == Intent::Kind::unknown);
    CHECK(to_string(Intent::Kind::wind) == "wind");
  }

  TEST_CASE("http provider parses a good answer") {
    FakeEmbedServer srv([](const httplib::Request& req, httplib::Response& res) { answer_vectors(req, res, 4); });
    HttpEmbeddingProvider p(srv.config(4));
    const auto idx = build_index({{"a", "one"}, {"b", "two"}}, p);
    CHECK(idx.provider_id == "http-embed");
    CHECK(idx.matrix(0, 0) == doctest::Approx(1.0));
    const auto vecs = p.embed_batch({"x", "y", "z"});
    REQUIRE(vecs.size() == 3);
    CHECK(vecs[2](2) == 2.0);
  }

  TEST_CASE("http provider retries server errors") {
    std::atomic<int> calls{0};
    FakeEmbedServer srv([&](const httplib::Request& req, httplib::Response& res) {
      if (calls++ == 0) {
        res.status = 503;
        return;
      }
      answer_vectors(req, res, 4);
    });
    HttpEmbeddingProvider p(srv.config(4));
    CHECK_NOTHROW(embed_text("hello", p));
    CHECK(srv.hits == 2);
  }

  TEST_CASE("http provider gives up after repeated server errors") {
    FakeEmbedServer srv([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    HttpEmbeddingProvider p(srv.config(4));
    CHECK(code_of([&] { embed_text("hello", p); }) == ErrorCode::ProviderUnavailable);
    CHECK(srv.hits == 3);
  }

  TEST_CASE("http provider does not retry client errors") {
    FakeEmbedServer srv([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    HttpEmbeddingProvider p(srv.config(4));
    CHECK(code_of([&] { embed_text("hello", p); }) == ErrorCode::ProviderUnavailable);
    CHECK(srv.hits == 1);
  }

  TEST_CASE("http provider rejects malformed answers") {
    for (const std::string body : {std::string("not json"), std::string(R"({"vectors": 3})"),
                                   std::string(R"({"dim": 4, "vectors": [[1,2]]})"),
                                   std::string(R"({"dim": 8, "vectors": [[1,2,3,4]]})"),
                                   std::string(R"({"vectors": [[1,2,"x",4]]})")}) {
      CAPTURE(body);
      FakeEmbedServer srv(
          [&](const httplib::Request&, httplib::Response& res) { res.set_content(body, "application/json"); });
      HttpEmbeddingProvider p(srv.config(4));
      CHECK(code_of([&] { p.embed_batch({"a"}); }) == ErrorCode::MalformedResponse);
    }
  }

  TEST_CASE("unreachable http provider is unavailable") {
    const int port = 1;  // nothing listens on a privileged port in the test environment
    HttpProviderConfig cfg;
    cfg.port = port;
    cfg.dim = 4;
    cfg.backoff_s = 0.01;
    cfg.timeout_s = 1.0;
    HttpEmbeddingProvider p(cfg);
    CHECK(code_of([&] { embed_text("hello", p); }) == ErrorCode::ProviderUnavailable);
  }
}
