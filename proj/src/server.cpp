#include "hairforge/server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <list>
#include <mutex>
#include <thread>

namespace hairforge::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

HttpReply route_http(const ServiceContext& ctx, const std::string& method, const std::string& target) {
  const auto json_reply = [](int status, const json& body) {
    return HttpReply{status, "application/json", body.dump()};
  };
  if (method != "GET") return json_reply(405, {{"error", "only GET is supported"}});
  const std::string path = target.substr(0, target.find('?'));
  if (path == "/healthz") return {200, "text/plain", "ok"};
  if (path == "/styles") {
    json list = json::array();
    for (const auto& h : ctx.styles) {
      list.push_back({{"id", h.id},
                      {"caption", h.caption},
                      {"strands", h.strands.size()},
                      {"vertices", h.vertex_count()},
                      {"thumbnail", thumbnail_url(h.id)}});
    }
    return json_reply(200, list);
  }
  constexpr std::string_view prefix = "/styles/";
  constexpr std::string_view suffix = "/thumbnail";
  if (path.size() > prefix.size() + suffix.size() && path.starts_with(prefix) && path.ends_with(suffix)) {
    const std::string id = path.substr(prefix.size(), path.size() - prefix.size() - suffix.size());
    const auto it = ctx.thumbnails.find(id);
    if (it != ctx.thumbnails.end()) return {200, "image/png", std::string(it->second.begin(), it->second.end())};
    return json_reply(404, {{"error", "no thumbnail for style '" + id + "'"}});
  }
  return json_reply(404, {{"error", "no route for " + path}});
}

namespace {

class WsConnection;

}  // namespace

struct Server::Impl {
  std::shared_ptr<const ServiceContext> ctx;
  ServerConfig cfg;

  std::atomic<bool> stopping{false};
  std::atomic<std::uint64_t> connections{0};
  std::atomic<std::uint64_t> open{0};
  std::atomic<std::uint64_t> frames_sent{0};
  std::atomic<std::uint64_t> frames_skipped{0};
  std::atomic<std::uint64_t> frames_dropped{0};

  std::mutex mu;
  std::condition_variable cv;
  int loops = 0;
  std::list<std::weak_ptr<WsConnection>> live;

  std::thread io_thread;
  bool started = false;
  bool stopped = false;

  // Declared last: destroying it releases any connection still referenced by
  // a pending handler while the members above are alive.
  net::io_context ioc{1};
  std::optional<tcp::acceptor> acceptor;

  void accept();
};

namespace {

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, Server::Impl& impl) : stream_(std::move(socket)), impl_(impl) {}
  void run() { read(); }

 private:
  void read();
  void on_read(beast::error_code ec);
  void on_write(bool close, beast::error_code ec);

  beast::tcp_stream stream_;
  Server::Impl& impl_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<http::response<http::string_body>> res_;
};

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, Server::Impl& impl)
      : ws_(std::move(socket)), impl_(impl), session_(std::make_unique<Session>(impl.ctx)) {}

  void run(http::request<http::string_body> req);
  void close();

 private:
  struct Outgoing {
    bool binary = false;
    std::string bytes;
  };

  void on_accept(beast::error_code ec);
  void read();
  void on_read(beast::error_code ec);
  void loop();
  void enqueue(std::vector<json> events, std::optional<std::vector<std::uint8_t>> frame);
  void write();
  void finish();

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& impl_;
  std::unique_ptr<Session> session_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;  // front is in flight while writing_
  bool writing_ = false;
  std::atomic<bool> closed_{false};
};

void HttpConnection::read() {
  req_ = {};
  stream_.expires_after(std::chrono::seconds(30));
  http::async_read(stream_, buffer_, req_,
                   [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
}

void HttpConnection::on_read(beast::error_code ec) {
  if (ec) {
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    return;
  }
  if (websocket::is_upgrade(req_)) {
    if (req_.target() == "/ws" && !impl_.stopping) {
      beast::get_lowest_layer(stream_).expires_never();
      auto conn = std::make_shared<WsConnection>(stream_.release_socket(), impl_);
      {
        std::lock_guard lock(impl_.mu);
        impl_.live.remove_if([](const auto& w) { return w.expired(); });
        impl_.live.push_back(conn);
      }
      conn->run(std::move(req_));
      return;
    }
  }
  const auto reply = route_http(*impl_.ctx, std::string(req_.method_string()), std::string(req_.target()));
  res_ = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(reply.status), req_.version());
  res_->set(http::field::server, "hairforge");
  res_->set(http::field::content_type, reply.content_type);
  res_->set(http::field::access_control_allow_origin, "*");
  res_->keep_alive(req_.keep_alive());
  res_->body() = reply.body;
  res_->prepare_payload();
  const bool close = res_->need_eof();
  http::async_write(stream_, *res_,
                    [self = shared_from_this(), close](beast::error_code e, std::size_t) { self->on_write(close, e); });
}

void HttpConnection::on_write(bool close, beast::error_code ec) {
  if (ec) return;
  if (close) {
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    return;
  }
  read();
}

void WsConnection::run(http::request<http::string_body> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.read_message_max(impl_.cfg.max_message_bytes);
  ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
}

void WsConnection::on_accept(beast::error_code ec) {
  if (ec) return;
  ++impl_.connections;
  ++impl_.open;
  {
    std::lock_guard lock(impl_.mu);
    ++impl_.loops;
  }
  // The reference is dropped before the count so stop() never outlives a connection.
  std::thread([self = shared_from_this(), impl = &impl_]() mutable {
    self->loop();
    self.reset();
    std::lock_guard lock(impl->mu);
    --impl->loops;
    impl->cv.notify_all();
  }).detach();
  read();
}

void WsConnection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
}

void WsConnection::on_read(beast::error_code ec) {
  if (ec) {
    finish();
    return;
  }
  const auto data = buffer_.cdata();
  const auto* p = static_cast<const std::uint8_t*>(data.data());
  if (ws_.got_text()) {
    session_->submit(std::string_view(reinterpret_cast<const char*>(p), data.size()));
  } else {
    session_->submit_binary(std::span<const std::uint8_t>(p, data.size()));
  }
  buffer_.consume(buffer_.size());
  read();
}

void WsConnection::finish() {
  if (!closed_.exchange(true)) --impl_.open;
}

void WsConnection::close() {
  net::post(ws_.get_executor(), [self = shared_from_this()] {
    beast::error_code ec;
    beast::get_lowest_layer(self->ws_).socket().close(ec);
    self->finish();
  });
}

void WsConnection::loop() {
  using Clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / impl_.cfg.frame_hz));
  auto next = Clock::now();
  while (!closed_ && !impl_.stopping) {
    auto frame = session_->advance_frame();
    auto events = session_->drain_events();
    if (frame || !events.empty()) {
      net::post(ws_.get_executor(), [self = shared_from_this(), events = std::move(events),
                                     frame = std::move(frame)]() mutable {
        self->enqueue(std::move(events), std::move(frame));
      });
    }
    next += period;
    const auto now = Clock::now();
    if (now > next) {
      const auto missed = (now - next) / period + 1;
      impl_.frames_dropped += static_cast<std::uint64_t>(missed);
      next += missed * period;
    }
    std::this_thread::sleep_until(next);
  }
}

void WsConnection::enqueue(std::vector<json> events, std::optional<std::vector<std::uint8_t>> frame) {
  if (closed_) return;
  for (auto& e : events) queue_.push_back({false, e.dump(-1, ' ', false, json::error_handler_t::replace)});
  if (frame) {
    // keep at most one unsent frame; a newer one replaces it
    const auto first_waiting = queue_.begin() + (writing_ ? 1 : 0);
    for (auto it = first_waiting; it != queue_.end(); ++it) {
      if (it->binary) {
        queue_.erase(it);
        ++impl_.frames_skipped;
        break;
      }
    }
    queue_.push_back({true, std::string(frame->begin(), frame->end())});
  }
  if (!writing_) write();
}

void WsConnection::write() {
  if (queue_.empty() || closed_) {
    writing_ = false;
    return;
  }
  writing_ = true;
  ws_.binary(queue_.front().binary);
  ws_.async_write(net::buffer(queue_.front().bytes), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->writing_ = false;
      self->finish();
      return;
    }
    if (self->queue_.front().binary) ++self->impl_.frames_sent;
    self->queue_.pop_front();
    self->write();
  });
}

}  // namespace

void Server::Impl::accept() {
  acceptor->async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (stopping) return;
    if (!ec) std::make_shared<HttpConnection>(std::move(socket), *this)->run();
    accept();
  });
}

Server::Server(std::shared_ptr<const ServiceContext> ctx, ServerConfig cfg) : impl_(std::make_unique<Impl>()) {
  if (!(cfg.frame_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame rate must be positive");
  impl_->ctx = std::move(ctx);
  impl_->cfg = std::move(cfg);
}

Server::~Server() { stop(); }

unsigned short Server::start() {
  if (impl_->started) throw Error(ErrorCode::InvalidState, "server already started");
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->cfg.address, ec);
  if (ec) throw Error(ErrorCode::InvalidArgument, "bad listen address '" + impl_->cfg.address + "'");
  const tcp::endpoint endpoint(address, impl_->cfg.port);
  auto& acc = impl_->acceptor.emplace(impl_->ioc);
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot listen on " + impl_->cfg.address + ":" + std::to_string(impl_->cfg.port) + ": " + ec.message());
  }
  impl_->started = true;
  impl_->accept();
  impl_->io_thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
  return acc.local_endpoint().port();
}

void Server::stop() {
  if (!impl_->started || impl_->stopped) return;
  impl_->stopped = true;
  impl_->stopping = true;
  net::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor->close(ec);
  });
  {
    std::unique_lock lock(impl_->mu);
    for (auto& w : impl_->live) {
      if (auto conn = w.lock()) conn->close();
    }
    impl_->cv.wait(lock, [this] { return impl_->loops == 0; });
  }
  impl_->ioc.stop();
  impl_->io_thread.join();
}

ServerStats Server::stats() const {
  return {impl_->connections, impl_->open, impl_->frames_sent, impl_->frames_skipped, impl_->frames_dropped};
}

}  // namespace hairforge::service
