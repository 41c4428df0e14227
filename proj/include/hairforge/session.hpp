#pragma once

// One client session, independent of the transport. Commands arrive as JSON
// text on any thread and are queued; the owner's loop calls advance_frame()
// once per display frame, which applies the queued commands in arrival order,
// steps the simulation and returns the frame packet to stream. Events (JSON)
// are collected from the loop and from background workers and drained by the
// transport.

#include "hairforge/generation.hpp"
#include "hairforge/groom.hpp"
#include "hairforge/protocol.hpp"
#include "hairforge/retrieval.hpp"
#include "hairforge/sim.hpp"

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hairforge::service {

using json = nlohmann::json;

// Shared, read-only after construction (the provider and generation backend
// are the exceptions and must be thread-safe).
struct ServiceContext {
  std::vector<Hairstyle> styles;
  retrieval::EmbeddingIndex index;
  std::shared_ptr<retrieval::EmbeddingProvider> provider;
  std::shared_ptr<const HeadMesh> head;
  std::shared_ptr<generation::GenerationBackend> generator;
  sim::SimConfig sim_config;
  std::map<std::string, std::vector<std::uint8_t>> thumbnails;  // id -> PNG

  const Hairstyle* find_style(const std::string& id) const;
};

inline constexpr int kThumbnailSize = 128;
inline constexpr double kChatWindStrength = 300.0;  // cm/s
inline constexpr double kChatWindGust = 0.3;
inline constexpr double kDefaultGrabRadius = 1.0;  // cm
inline constexpr int kMaxGrowCount = 4000;

// Front view of the style over the head, as PNG.
std::vector<std::uint8_t> render_thumbnail(const Hairstyle& h, const HeadMesh* head, int size = kThumbnailSize);

std::string thumbnail_url(const std::string& id);

// Runs tasks one at a time on its own thread, in submission order.
class SerialWorker {
 public:
  SerialWorker();
  ~SerialWorker();
  SerialWorker(const SerialWorker&) = delete;
  SerialWorker& operator=(const SerialWorker&) = delete;

  void post(std::function<void()> task);
  void drain();

 private:
  void run();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool busy_ = false;
  bool stop_ = false;
  std::thread thread_;
};

class Session {
 public:
  explicit Session(std::shared_ptr<const ServiceContext> ctx);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Thread-safe. Malformed input produces an error event, never an exception.
  void submit(std::string_view text);
  void submit_binary(std::span<const std::uint8_t> bytes);

  // Loop side. Returns the packet for this display frame, or nothing when no
  // style is loaded or a paused state did not change.
  std::optional<std::vector<std::uint8_t>> advance_frame();

  // Thread-safe.
  std::vector<json> drain_events();

  // Blocks until background retrieval and generation work has finished.
  void drain_background();

  // Loop-side accessors (tests).
  const sim::SimState* state() const { return sim_ ? &*sim_ : nullptr; }
  const sim::SimConfig& config() const { return cfg_; }
  bool running() const { return running_; }
  int stride() const { return stride_; }
  std::uint32_t frames_sent() const { return frame_id_; }

 private:
  void emit(json event);
  void apply(const protocol::Command& cmd);
  void handle_chat(const protocol::Command& cmd);
  void select_style(const std::string& id);
  void apply_wind(const sim::WindField& wind);
  void apply_head_transform(const sim::Isometry& t);
  void grow(const json& body);
  void set_params(const json& body);
  void render(const RenderAttributes& attrs, const json& body, const json& id);
  void rebuild(const Hairstyle& h);
  void release_grab();
  json status() const;

  std::shared_ptr<const ServiceContext> ctx_;

  std::mutex in_mu_;
  std::deque<std::string> inbox_;

  std::mutex out_mu_;
  std::vector<json> events_;

  // loop-owned
  sim::SimConfig cfg_;
  std::optional<sim::SimState> sim_;
  std::optional<Hairstyle> base_;  // what reset rebuilds from
  std::string selected_style_;
  sim::WindField wind_;
  sim::Isometry head_transform_ = sim::Isometry::Identity();
  std::optional<groom::GrabHandle> grab_;
  bool running_ = false;
  bool step_once_ = false;
  bool dirty_ = false;
  int stride_ = 1;
  std::uint32_t frame_id_ = 0;
  std::uint64_t render_seq_ = 0;

  // Declared last so they stop before the state they report into goes away.
  std::unique_ptr<generation::GenerationQueue> generation_;
  std::unique_ptr<SerialWorker> worker_;
};

}  // namespace hairforge::service
