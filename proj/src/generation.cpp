#include "hairforge/generation.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>

namespace hairforge::generation {

namespace {

using Clock = std::chrono::steady_clock;

bool looks_like_png(const std::string& body) {
  static constexpr char kSig[] = "\x89PNG\r\n\x1a\n";
  return body.size() >= 8 && body.compare(0, 8, kSig, 8) == 0;
}

std::string error_message(const httplib::Result& res) {
  try {
    const auto doc = nlohmann::json::parse(res->body);
    if (doc.is_object() && doc.contains("error") && doc["error"].is_string()) return doc["error"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return res->body.substr(0, 200);
}

}  // namespace

void validate(const GenerationRequest& req) {
  if (req.prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "generation prompt is empty");
  }
  if (req.edge_map.empty()) throw Error(ErrorCode::InvalidArgument, "generation edge map is empty");
  if (req.width < kMinSize || req.height < kMinSize) {
    throw Error(ErrorCode::InvalidArgument, "generation size must be at least " + std::to_string(kMinSize));
  }
}

ImageResult HttpGenerationClient::generate(const GenerationRequest& req) {
  validate(req);
  const auto png = imaging::encode_png(req.edge_map);
  httplib::MultipartFormDataItems items = {
      {"edge", std::string(png.begin(), png.end()), "edge.png", "image/png"},
      {"prompt", req.prompt, "", ""},
      {"seed", std::to_string(req.seed), "", ""},
      {"width", std::to_string(req.width), "", ""},
      {"height", std::to_string(req.height), "", ""},
  };
  httplib::Client client(cfg_.host, cfg_.port);
  const auto timeout =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg_.timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto start = Clock::now();
  auto res = client.Post(cfg_.path, items);
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  const std::string where = cfg_.host + ":" + std::to_string(cfg_.port) + cfg_.path;
  if (!res) {
    if (res.error() == httplib::Error::ConnectionTimeout ||
        (res.error() == httplib::Error::Read && elapsed >= cfg_.timeout_s * 0.99)) {
      throw Error(ErrorCode::Timeout, "generation at " + where + " timed out after " + std::to_string(elapsed) + " s");
    }
    throw Error(ErrorCode::ServiceUnavailable, "generation at " + where + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ServiceUnavailable,
                "generation at " + where + " answered " + std::to_string(res->status) + ": " + error_message(res));
  }
  if (!looks_like_png(res->body)) throw Error(ErrorCode::MalformedResponse, "generation response is not a PNG");
  return {std::vector<std::uint8_t>(res->body.begin(), res->body.end()), elapsed};
}

ImageResult MockGenerationBackend::generate(const GenerationRequest& req) {
  validate(req);
  const auto start = Clock::now();
  {
    std::lock_guard lock(mu_);
    prompts_.push_back(req.prompt);
  }
  if (delay_s_ > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(delay_s_));
  return {png_, std::chrono::duration<double>(Clock::now() - start).count()};
}

std::vector<std::string> MockGenerationBackend::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

std::vector<std::uint8_t> placeholder_png(int width, int height) {
  imaging::GrayImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img.at(x, y) = static_cast<std::uint8_t>((x + y) * 255 / std::max(1, width + height - 2));
  }
  return imaging::encode_png(img);
}

GenerationQueue::GenerationQueue(std::shared_ptr<GenerationBackend> backend)
    : backend_(std::move(backend)), worker_([this] { run(); }) {}

GenerationQueue::~GenerationQueue() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

std::uint64_t GenerationQueue::submit(GenerationRequest req, Callback done, StartCallback started) {
  validate(req);
  std::uint64_t ticket = 0;
  {
    std::lock_guard lock(mu_);
    ticket = next_ticket_++;
    jobs_.push_back({ticket, std::move(req), std::move(done), std::move(started)});
  }
  cv_.notify_all();
  return ticket;
}

std::size_t GenerationQueue::waiting() const {
  std::lock_guard lock(mu_);
  return jobs_.size();
}

bool GenerationQueue::busy() const {
  std::lock_guard lock(mu_);
  return busy_;
}

void GenerationQueue::drain() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return jobs_.empty() && !busy_; });
}

void GenerationQueue::run() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
      // pending jobs are abandoned on shutdown
      if (stop_) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
      busy_ = true;
    }
    GenerationOutcome outcome = Error(ErrorCode::ServiceUnavailable, "not run");
    try {
      if (job.started) job.started(job.ticket);
      outcome = backend_->generate(job.req);
    } catch (const Error& e) {
      outcome = e;
    } catch (const std::exception& e) {
      outcome = Error(ErrorCode::ServiceUnavailable, e.what());
    }
    if (job.done) job.done(job.ticket, std::move(outcome));
    {
      std::lock_guard lock(mu_);
      busy_ = false;
    }
    cv_.notify_all();
  }
}

}  // namespace hairforge::generation
