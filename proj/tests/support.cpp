#include "support.hpp"

#include "hairforge/bytes.hpp"
#include "hairforge/fixtures.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <fstream>
#include <random>

namespace hftest {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using namespace hairforge;

std::string data_path(const std::string& name) { return std::string(HAIRFORGE_TEST_DATA) + "/" + name; }

TempDir::TempDir() {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() / ("hairforge-test-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<Hairstyle> small_styles(int strands_per_style) {
  const auto head = fixtures::default_head();
  std::vector<Hairstyle> out;
  for (auto recipe : fixtures::database_recipes()) {
    recipe.strands = strands_per_style;
    out.push_back(fixtures::make_style(recipe, *head));
  }
  return out;
}

std::shared_ptr<service::ServiceContext> small_context(int strands_per_style, double generation_delay_s) {
  auto ctx = std::make_shared<service::ServiceContext>();
  ctx->head = fixtures::default_head();
  ctx->styles = small_styles(strands_per_style);
  ctx->provider = std::make_shared<retrieval::HashingProvider>();
  std::vector<std::pair<std::string, std::string>> captioned;
  for (const auto& h : ctx->styles) {
    captioned.emplace_back(h.id, h.caption);
    ctx->thumbnails[h.id] = service::render_thumbnail(h, ctx->head.get(), 32);
  }
  ctx->index = retrieval::build_index(captioned, *ctx->provider);
  ctx->generator = std::make_shared<generation::MockGenerationBackend>(generation::placeholder_png(), generation_delay_s);
  return ctx;
}

std::vector<CannyCase> load_canny_oracle() {
  std::ifstream in(data_path("canny_oracle.bin"), std::ios::binary);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(bytes);
  std::string magic;
  std::uint32_t count = 0;
  if (!r.bytes(4, magic) || magic != "CNYO" || !r.u32(count)) throw std::runtime_error("bad canny oracle file");
  const auto f64 = [&](double& v) {
    std::uint32_t lo = 0, hi = 0;
    if (!r.u32(lo) || !r.u32(hi)) throw std::runtime_error("truncated canny oracle file");
    v = std::bit_cast<double>((static_cast<std::uint64_t>(hi) << 32) | lo);
  };
  std::vector<CannyCase> cases;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t w = 0, h = 0;
    CannyCase c{};
    if (!r.u32(w) || !r.u32(h)) throw std::runtime_error("truncated canny oracle file");
    f64(c.sigma);
    f64(c.low);
    f64(c.high);
    std::string img, edges;
    if (!r.bytes(std::size_t{w} * h, img) || !r.bytes(std::size_t{w} * h, edges)) {
      throw std::runtime_error("truncated canny oracle file");
    }
    c.image = imaging::GrayImage(static_cast<int>(w), static_cast<int>(h));
    c.edges = imaging::GrayImage(static_cast<int>(w), static_cast<int>(h));
    std::copy(img.begin(), img.end(), c.image.data.begin());
    std::copy(edges.begin(), edges.end(), c.edges.data.begin());
    cases.push_back(std::move(c));
  }
  return cases;
}

struct WsClient::Impl {
  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws{ioc};
  beast::flat_buffer buffer;
  bool open = false;
  bool reading = false;  // an async read is outstanding
  bool read_done = false;
  beast::error_code read_ec;

  void write(bool binary, const std::string& bytes) {
    ws.binary(binary);
    beast::error_code result;
    bool done = false;
    ws.async_write(net::buffer(bytes), [&](beast::error_code ec, std::size_t) {
      result = ec;
      done = true;
    });
    ioc.restart();
    while (!done && !ioc.stopped()) ioc.run_one();
    if (!done) throw std::runtime_error("websocket write did not complete");
    if (result) {
      open = false;
      throw std::runtime_error("websocket write failed: " + result.message());
    }
  }
};

WsClient::WsClient(unsigned short port) : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->ioc);
  auto& lowest = beast::get_lowest_layer(impl_->ws);
  lowest.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  impl_->ws.read_message_max(64 << 20);
  impl_->ws.handshake("127.0.0.1:" + std::to_string(port), "/ws");
  impl_->open = true;
}

WsClient::~WsClient() { close(); }

void WsClient::send_text(const std::string& text) { impl_->write(false, text); }

void WsClient::send_binary(const std::string& bytes) { impl_->write(true, bytes); }

std::optional<WsMessage> WsClient::read(std::chrono::milliseconds timeout) {
  auto& m = *impl_;
  if (!m.reading) {
    m.reading = true;
    m.read_done = false;
    m.ws.async_read(m.buffer, [&m](beast::error_code ec, std::size_t) {
      m.read_ec = ec;
      m.read_done = true;
    });
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!m.read_done) {
    m.ioc.restart();
    const auto left = deadline - std::chrono::steady_clock::now();
    if (left <= std::chrono::steady_clock::duration::zero()) break;
    m.ioc.run_one_for(left);
  }
  if (!m.read_done) return std::nullopt;
  m.reading = false;
  if (m.read_ec) {
    m.open = false;
    throw std::runtime_error("websocket read failed: " + m.read_ec.message());
  }
  WsMessage out;
  out.binary = m.ws.got_binary();
  out.bytes = beast::buffers_to_string(m.buffer.data());
  m.buffer.consume(m.buffer.size());
  return out;
}

bool WsClient::is_open() const { return impl_->open && impl_->ws.is_open(); }

void WsClient::close() {
  if (!impl_ || !impl_->open) return;
  impl_->open = false;
  beast::error_code ec;
  if (impl_->reading) {
    beast::get_lowest_layer(impl_->ws).socket().close(ec);
  } else {
    impl_->ws.close(websocket::close_code::normal, ec);
  }
}

HttpResult http_get(unsigned short port, const std::string& target) {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  tcp::resolver resolver(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req(http::verb::get, target, 11);
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), std::string(res[http::field::content_type]), res.body()};
}

}  // namespace hftest
