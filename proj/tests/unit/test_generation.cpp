#include "doctest.h"

#include "hairforge/generation.hpp"

#include "httplib.h"

#include <atomic>
#include <thread>

using namespace hairforge;
using namespace hairforge::generation;

namespace {

GenerationRequest request(const std::string& prompt) {
  GenerationRequest r;
  r.edge_map = imaging::GrayImage(64, 64, 0);
  r.prompt = prompt;
  r.width = r.height = 64;
  return r;
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

class FakeGenServer {
 public:
  explicit FakeGenServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/generate", std::move(handler));
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeGenServer() {
    server_.stop();
    thread_.join();
  }
  HttpGenerationConfig config(double timeout = 5.0) const {
    HttpGenerationConfig c;
    c.port = port;
    c.timeout_s = timeout;
    return c;
  }
  int port = 0;

 private:
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace

TEST_SUITE("generation") {
  TEST_CASE("request validation") {
    CHECK_NOTHROW(validate(request("a")));
    CHECK(code_of([] { validate(request("")); }) == ErrorCode::InvalidArgument);
    auto r = request("a");
    r.width = 32;
    CHECK(code_of([&] { validate(r); }) == ErrorCode::InvalidArgument);
    r = request("a");
    r.edge_map = {};
    CHECK(code_of([&] { validate(r); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("mock backend echoes its image and records prompts") {
    const auto png = placeholder_png();
    MockGenerationBackend mock(png);
    const auto out = mock.generate(request("hello"));
    CHECK(out.png == png);
    CHECK(mock.prompts() == std::vector<std::string>{"hello"});
    CHECK(imaging::decode_png(png).width == 64);
  }

  TEST_CASE("queue runs one request at a time in submission order") {
    auto mock = std::make_shared<MockGenerationBackend>(placeholder_png(), 0.02);
    GenerationQueue q(mock);
    std::mutex mu;
    std::vector<std::uint64_t> started, done;
    std::atomic<int> concurrent{0}, peak{0};
    for (int i = 0; i < 5; ++i) {
      const auto t = q.submit(
          request("p" + std::to_string(i)),
          [&](std::uint64_t ticket, GenerationOutcome o) {
            CHECK(std::holds_alternative<ImageResult>(o));
            --concurrent;
            std::lock_guard lock(mu);
            done.push_back(ticket);
          },
          [&](std::uint64_t ticket) {
            peak = std::max(peak.load(), ++concurrent);
            std::lock_guard lock(mu);
            started.push_back(ticket);
          });
      CHECK(t == static_cast<std::uint64_t>(i + 1));
    }
    q.drain();
    CHECK_FALSE(q.busy());
    CHECK(q.waiting() == 0);
    CHECK(done == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(started == done);
    CHECK(peak == 1);
    CHECK(mock->prompts() == std::vector<std::string>{"p0", "p1", "p2", "p3", "p4"});
  }

  TEST_CASE("queue rejects invalid requests up front") {
    GenerationQueue q(std::make_shared<MockGenerationBackend>(placeholder_png()));
    CHECK(code_of([&] { q.submit(request(""), [](std::uint64_t, GenerationOutcome) {}); }) ==
          ErrorCode::InvalidArgument);
  }

  TEST_CASE("http client posts a multipart request") {
    const auto png = placeholder_png(32, 32);
    std::string prompt, seed;
    bool had_edge = false;
    FakeGenServer srv([&](const httplib::Request& req, httplib::Response& res) {
      prompt = req.get_file_value("prompt").content;
      seed = req.get_file_value("seed").content;
      had_edge = req.get_file_value("edge").content.size() > 8;
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
    HttpGenerationClient client(srv.config());
    auto r = request("blonde hair");
    r.seed = 42;
    const auto out = client.generate(r);
    CHECK(out.png == png);
    CHECK(prompt == "blonde hair");
    CHECK(seed == "42");
    CHECK(had_edge);
  }

  TEST_CASE("http client error mapping") {
    {
      FakeGenServer srv([](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content(R"({"error":"warming up"})", "application/json");
      });
      HttpGenerationClient client(srv.config());
      CHECK(code_of([&] { client.generate(request("x")); }) == ErrorCode::ServiceUnavailable);
    }
    {
      FakeGenServer srv(
          [](const httplib::Request&, httplib::Response& res) { res.set_content("hello", "text/plain"); });
      HttpGenerationClient client(srv.config());
      CHECK(code_of([&] { client.generate(request("x")); }) == ErrorCode::MalformedResponse);
    }
    {
      FakeGenServer srv([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        res.set_content("late", "text/plain");
      });
      HttpGenerationClient client(srv.config(0.3));
      CHECK(code_of([&] { client.generate(request("x")); }) == ErrorCode::Timeout);
    }
  }

  TEST_CASE("unreachable generation service") {
    const int port = 1;  // nothing listens on a privileged port in the test environment
    HttpGenerationConfig cfg;
    cfg.port = port;
    cfg.timeout_s = 1.0;
    HttpGenerationClient client(cfg);
    CHECK(code_of([&] { client.generate(request("x")); }) == ErrorCode::ServiceUnavailable);
  }

  TEST_CASE("queue surfaces backend errors as outcomes") {
    const int port = 1;  // nothing listens on a privileged port in the test environment
    HttpGenerationConfig cfg;
    cfg.port = port;
    GenerationQueue q(std::make_shared<HttpGenerationClient>(cfg));
    std::optional<ErrorCode> code;
    q.submit(request("x"), [&](std::uint64_t, GenerationOutcome o) {
      if (auto* e = std::get_if<Error>(&o)) code = e->code();
    });
    q.drain();
    CHECK(code == ErrorCode::ServiceUnavailable);
  }
}
