#include "hairforge/session.hpp"

#include "hairforge/growth.hpp"
#include "hairforge/head.hpp"
#include "hairforge/imaging.hpp"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include <cmath>

namespace hairforge::service {

namespace {

constexpr std::size_t kMaxPending = 65536;
constexpr double kFragmentMargin = 150.0;  // cm around the head

std::string base64(const std::vector<std::uint8_t>& bytes) {
  namespace it = boost::archive::iterators;
  using Encoder = it::base64_from_binary<it::transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
  std::string out(Encoder(bytes.begin()), Encoder(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

json id_of(std::string_view text) {
  const json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_object() && doc.contains("id") && (doc["id"].is_string() || doc["id"].is_number_integer())) {
    return doc["id"];
  }
  return nullptr;
}

HeadMesh transformed(const HeadMesh& head, const sim::Isometry& t) {
  HeadMesh out = head;
  for (auto& v : out.vertices) v = t * v;
  for (auto& n : out.vertex_normals) n = t.linear() * n;
  for (auto& p : out.collision_proxies) p.center = t * p.center;
  return out;
}

sim::Isometry read_transform(const json& body) {
  sim::Isometry t = sim::Isometry::Identity();
  if (body.contains("matrix")) {
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) m(r, c) = body["matrix"][static_cast<std::size_t>(4 * r + c)].get<double>();
    }
    t.matrix() = m;
    return t;
  }
  if (body.contains("rotation")) {
    const auto& q = body["rotation"];
    Eigen::Quaterniond rot(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
    if (!(rot.norm() > 1e-12)) throw Error(ErrorCode::NonRigidTransform, "rotation quaternion is zero");
    t.linear() = rot.normalized().toRotationMatrix();
  }
  if (body.contains("translation")) t.translation() = protocol::read_vec3(body, "translation");
  return t;
}

sim::KindParams& kind_params(sim::SimConfig& cfg, const std::string& kind) {
  if (kind == "edge") return cfg.edge;
  if (kind == "bend") return cfg.bend;
  if (kind == "torsion") return cfg.torsion;
  if (kind == "aug_local") return cfg.aug_local;
  return cfg.aug_global;
}

void set_growth_param(growth::GrowthParams& p, const std::string& key, double v) {
  if (key == "p_gamma_cap") p.p_gamma_cap = v;
  else if (key == "p_gravity") p.p_gravity = v;
  else if (key == "p_spiral") p.p_spiral = v;
  else if (key == "p_helix_radius") p.p_helix_radius = v;
  else if (key == "p_freq") p.p_freq = v;
  else if (key == "segment_scale") p.segment_scale = v;
  else if (key == "perturbation_scale") p.perturbation_scale = v;
  else if (key == "steps") {
    if (v != std::floor(v) || v < 0 || v > 1000) throw Error(ErrorCode::MalformedCommand, "growth param 'steps' must be an integer in [0, 1000]");
    p.steps = static_cast<int>(v);
  } else {
    throw Error(ErrorCode::MalformedCommand, "unknown growth param '" + key + "'");
  }
}

}  // namespace

const Hairstyle* ServiceContext::find_style(const std::string& id) const {
  for (const auto& h : styles) {
    if (h.id == id) return &h;
  }
  return nullptr;
}

std::vector<std::uint8_t> render_thumbnail(const Hairstyle& h, const HeadMesh* head, int size) {
  imaging::Camera cam;
  cam.eye = {0.0, 2.0, 75.0};
  cam.target = {0.0, -2.0, 0.0};
  cam.width = size;
  cam.height = size;
  return imaging::encode_png(imaging::rasterize_strands(h, head, cam));
}

std::string thumbnail_url(const std::string& id) { return "/styles/" + id + "/thumbnail"; }

SerialWorker::SerialWorker() : thread_([this] { run(); }) {}

SerialWorker::~SerialWorker() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void SerialWorker::post(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    tasks_.push_back(std::move(task));
  }
  cv_.notify_all();
}

void SerialWorker::drain() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return tasks_.empty() && !busy_; });
}

void SerialWorker::run() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stop_ || !tasks_.empty(); });
      if (stop_) return;
      task = std::move(tasks_.front());
      tasks_.pop_front();
      busy_ = true;
    }
    task();
    {
      std::lock_guard lock(mu_);
      busy_ = false;
    }
    cv_.notify_all();
  }
}

Session::Session(std::shared_ptr<const ServiceContext> ctx)
    : ctx_(std::move(ctx)), cfg_(ctx_->sim_config), worker_(std::make_unique<SerialWorker>()) {
  if (ctx_->generator) generation_ = std::make_unique<generation::GenerationQueue>(ctx_->generator);
}

Session::~Session() {
  worker_.reset();
  generation_.reset();
}

void Session::emit(json event) {
  std::lock_guard lock(out_mu_);
  events_.push_back(std::move(event));
}

std::vector<json> Session::drain_events() {
  std::lock_guard lock(out_mu_);
  return std::exchange(events_, {});
}

void Session::drain_background() {
  worker_->drain();
  if (generation_) generation_->drain();
}

void Session::submit(std::string_view text) {
  {
    std::lock_guard lock(in_mu_);
    if (inbox_.size() < kMaxPending) {
      inbox_.emplace_back(text);
      return;
    }
  }
  emit(protocol::error_event(ErrorCode::InvalidState, "command queue is full", id_of(text)));
}

void Session::submit_binary(std::span<const std::uint8_t>) {
  emit(protocol::error_event(ErrorCode::MalformedCommand, "commands must be JSON text messages"));
}

std::optional<std::vector<std::uint8_t>> Session::advance_frame() {
  std::deque<std::string> batch;
  {
    std::lock_guard lock(in_mu_);
    batch.swap(inbox_);
  }
  for (const auto& text : batch) {
    json id = nullptr;
    try {
      const auto cmd = protocol::parse_command(text);
      id = cmd.id;
      apply(cmd);
    } catch (const Error& e) {
      emit(protocol::error_event(e.code(), e.what(), id.is_null() ? id_of(text) : id));
    } catch (const std::exception& e) {
      emit(protocol::error_event(ErrorCode::InvalidArgument, e.what(), id.is_null() ? id_of(text) : id));
    }
  }
  if (!sim_) return std::nullopt;

  const bool advance = running_ || step_once_;
  step_once_ = false;
  if (advance) {
    try {
      sim::step_frame(*sim_, cfg_);
    } catch (const Error& e) {
      running_ = false;
      dirty_ = true;
      emit(protocol::error_event(e.code(), e.what()));
      emit(status());
    }
    Vec3 center = head_transform_.translation();
    double reach = kFragmentMargin;
    if (ctx_->head) {
      const auto box = ctx_->head->bounds();
      center = head_transform_ * box.center();
      reach += 0.5 * box.diagonal().norm();
    }
    const Eigen::AlignedBox3d bounds(center.array() - reach, center.array() + reach);
    groom::collect_fragments(*sim_, bounds);
  }
  if (!advance && !dirty_) return std::nullopt;
  dirty_ = false;
  return protocol::encode_frame(frame_id_++, *sim_, stride_);
}

json Session::status() const {
  json s = {{"type", "sim_status"}, {"running", running_}, {"frames", frame_id_}};
  if (sim_) {
    s["style"] = selected_style_;
    s["strands"] = sim_->strands.size();
    s["particles"] = sim_->particle_count();
    s["time"] = sim_->time;
  } else {
    s["style"] = nullptr;
  }
  s["wind"] = wind_.enabled;
  s["stride"] = stride_;
  return s;
}

void Session::rebuild(const Hairstyle& h) {
  sim::SimState s = sim::build_sim(h, ctx_->head, cfg_);
  if (!head_transform_.matrix().isIdentity()) sim::set_head_transform(s, head_transform_);
  sim::set_wind(s, wind_);
  release_grab();
  sim_ = std::move(s);
  base_ = h;
  dirty_ = true;
}

void Session::release_grab() {
  if (grab_ && sim_) groom::end_grab(*sim_, *grab_);
  grab_.reset();
}

void Session::apply_wind(const sim::WindField& wind) {
  sim::SimState probe;
  sim::set_wind(probe, wind);
  wind_ = wind;
  if (sim_) sim::set_wind(*sim_, wind_);
}

void Session::apply_head_transform(const sim::Isometry& t) {
  sim::SimState probe;
  sim::set_head_transform(probe, t);
  head_transform_ = t;
  if (sim_) {
    sim::set_head_transform(*sim_, t);
    dirty_ = true;
  }
}

void Session::select_style(const std::string& id) {
  const Hairstyle* h = ctx_->find_style(id);
  if (!h) throw Error(ErrorCode::NotFound, "no style with id '" + id + "'");
  rebuild(*h);
  selected_style_ = id;
  running_ = true;
}

void Session::apply(const protocol::Command& cmd) {
  using protocol::CommandType;
  const json& b = cmd.body;
  const auto require_sim = [&] {
    if (!sim_) throw Error(ErrorCode::InvalidState, "no style is loaded");
  };
  switch (cmd.type) {
    case CommandType::chat:
      handle_chat(cmd);
      return;
    case CommandType::select_style:
      select_style(b["style"].get<std::string>());
      emit(protocol::ack_event(cmd, {{"style", selected_style_}}));
      emit(status());
      return;
    case CommandType::sim_control: {
      const auto action = b["action"].get<std::string>();
      if (action == "reset") {
        require_sim();
        rebuild(*base_);
      } else if (action == "step") {
        require_sim();
        running_ = false;
        step_once_ = true;
      } else {
        running_ = action != "pause";
        if (running_) require_sim();
      }
      emit(protocol::ack_event(cmd, {{"action", action}}));
      emit(status());
      return;
    }
    case CommandType::wind: {
      sim::WindField w = wind_;
      w.enabled = b["enabled"].get<bool>();
      if (b.contains("strength")) w.strength = b["strength"].get<double>();
      if (b.contains("direction")) w.direction = protocol::read_vec3(b, "direction");
      if (b.contains("gust_amplitude")) w.gust_amplitude = b["gust_amplitude"].get<double>();
      if (b.contains("gust_frequency")) w.gust_frequency = b["gust_frequency"].get<double>();
      if (b.contains("turbulence_seed")) w.turbulence_seed = b["turbulence_seed"].get<std::uint64_t>();
      apply_wind(w);
      emit(protocol::ack_event(cmd, {{"enabled", w.enabled}, {"strength", w.strength}}));
      return;
    }
    case CommandType::head_transform:
      apply_head_transform(read_transform(b));
      emit(protocol::ack_event(cmd));
      return;
    case CommandType::grab_begin: {
      require_sim();
      release_grab();
      groom::Ray ray{protocol::read_vec3(b, "origin"), protocol::read_vec3(b, "direction")};
      const double radius = b.contains("radius") ? b["radius"].get<double>() : kDefaultGrabRadius;
      grab_ = groom::begin_grab(*sim_, ray, radius);
      emit(protocol::ack_event(cmd, {{"particles", grab_->particle_ids.size()}}));
      return;
    }
    case CommandType::grab_move:
      require_sim();
      if (!grab_) throw Error(ErrorCode::InvalidState, "no grab in progress");
      try {
        groom::update_grab(*sim_, *grab_, protocol::read_vec3(b, "target"));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::StaleHandle) grab_.reset();
        throw;
      }
      emit(protocol::ack_event(cmd));
      return;
    case CommandType::grab_end:
      if (!grab_) throw Error(ErrorCode::InvalidState, "no grab in progress");
      release_grab();
      emit(protocol::ack_event(cmd));
      return;
    case CommandType::trim: {
      require_sim();
      const auto sel = b["selector"].get<std::string>();
      groom::TrimRegion region;
      if (sel == "sphere") {
        region = groom::SphereRegion{protocol::read_vec3(b, "center"), b["radius"].get<double>()};
      } else if (sel == "below_plane") {
        region = groom::BelowPlaneRegion{protocol::read_vec3(b, "point"), protocol::read_vec3(b, "normal")};
      } else {
        region = groom::TailRegion{b["strand"].get<int>(), b["index"].get<int>()};
      }
      const std::size_t removed = groom::trim(*sim_, region);
      if (removed > 0) dirty_ = true;
      emit(protocol::ack_event(cmd, {{"removed", removed}, {"particles", sim_->particle_count()}}));
      return;
    }
    case CommandType::grow:
      grow(b);
      emit(protocol::ack_event(cmd, {{"strands", sim_->strands.size()}, {"particles", sim_->particle_count()}}));
      emit(status());
      return;
    case CommandType::set_params:
      set_params(b);
      emit(protocol::ack_event(cmd));
      return;
    case CommandType::render: {
      RenderAttributes attrs;
      if (b.contains("attributes")) {
        for (const auto& [key, value] : b["attributes"].items()) {
          const auto v = value.get<std::string>();
          if (key == "gender") attrs.gender = v;
          else if (key == "hair_color") attrs.hair_color = v;
          else if (key == "head_pose") attrs.head_pose = v;
          else if (key == "misc") attrs.misc = v;
          else throw Error(ErrorCode::MalformedCommand, "unknown render attribute '" + key + "'");
        }
      }
      render(attrs, b, cmd.id);
      emit(protocol::ack_event(cmd, {{"render", render_seq_}}));
      return;
    }
    case CommandType::set_stride:
      stride_ = b["stride"].get<int>();
      dirty_ = sim_.has_value();
      emit(protocol::ack_event(cmd, {{"stride", stride_}}));
      return;
  }
}

void Session::handle_chat(const protocol::Command& cmd) {
  const auto text = cmd.body["text"].get<std::string>();
  const auto intent = retrieval::route_intent(text);
  using Kind = retrieval::Intent::Kind;
  switch (intent.kind) {
    case Kind::unknown:
      throw Error(ErrorCode::EmptyText, "chat message has no words");
    case Kind::wind: {
      sim::WindField w = wind_;
      w.enabled = intent.on;
      if (intent.on) {
        w.strength = intent.strength.value_or(kChatWindStrength);
        if (w.gust_amplitude == 0.0) w.gust_amplitude = kChatWindGust;
      }
      apply_wind(w);
      if (intent.on && sim_) running_ = true;
      emit(protocol::ack_event(cmd, {{"intent", "wind"}, {"enabled", w.enabled}, {"strength", w.strength}}));
      emit(status());
      return;
    }
    case Kind::simulate:
      if (intent.on && !sim_) throw Error(ErrorCode::InvalidState, "no style is loaded");
      running_ = intent.on;
      emit(protocol::ack_event(cmd, {{"intent", "simulate"}, {"running", running_}}));
      emit(status());
      return;
    case Kind::render:
      render(intent.attributes, json::object(), cmd.id);
      emit(protocol::ack_event(cmd, {{"intent", "render"}, {"render", render_seq_}}));
      return;
    case Kind::retrieve:
      break;
  }
  if (ctx_->index.size() == 0 || !ctx_->provider) throw Error(ErrorCode::NotFound, "no style index is loaded");
  emit(protocol::ack_event(cmd, {{"intent", "retrieve"}}));
  worker_->post([this, ctx = ctx_, query = intent.query, id = cmd.id] {
    try {
      const auto q = retrieval::embed_text(query, *ctx->provider);
      const auto result = retrieval::retrieve_top_k(ctx->index, q, retrieval::kDefaultTopK);
      json list = json::array();
      for (const auto& e : result.entries) {
        const Hairstyle* h = ctx->find_style(e.id);
        list.push_back({{"id", e.id},
                        {"score", e.score},
                        {"caption", h ? h->caption : std::string()},
                        {"thumbnail", thumbnail_url(e.id)}});
      }
      json event = {{"type", "candidates"}, {"query", query}, {"candidates", std::move(list)}};
      if (!id.is_null()) event["id"] = id;
      emit(std::move(event));
    } catch (const Error& e) {
      emit(protocol::error_event(e.code(), e.what(), id));
    } catch (const std::exception& e) {
      emit(protocol::error_event(ErrorCode::ProviderUnavailable, e.what(), id));
    }
  });
}

void Session::grow(const json& b) {
  if (!ctx_->head) throw Error(ErrorCode::InvalidState, "no head mesh to grow on");
  const auto region = b["region"].get<std::string>();
  const HeadMesh& head = *ctx_->head;
  const PaintSelection sel = region == "scalp"   ? scalp_selection(head)
                             : region == "beard" ? beard_selection(head)
                                                 : mustache_selection(head);
  growth::GrowthParams params;
  if (b.contains("params")) {
    for (const auto& [key, value] : b["params"].items()) set_growth_param(params, key, value.get<double>());
  }
  growth::validate(params);
  const int count = b.contains("count") ? b["count"].get<int>()
                                        : std::min(kMaxGrowCount, growth::strand_count_for(head, sel));
  if (count > kMaxGrowCount) {
    throw Error(ErrorCode::InvalidArgument, "grow count is limited to " + std::to_string(kMaxGrowCount));
  }
  const std::uint64_t seed = b.contains("seed") ? b["seed"].get<std::uint64_t>() : 0;
  auto strands = growth::grow_region(head, sel, params, count, seed);
  std::erase_if(strands, [](const Strand& s) { return s.size() < 2; });
  if (strands.empty()) throw Error(ErrorCode::InvalidArgument, "grow produced no simulatable strands");

  const bool append = b.contains("append") ? b["append"].get<bool>() : true;
  if (append && sim_) {
    sim::append_strands(*sim_, strands, cfg_);
    base_->strands.insert(base_->strands.end(), strands.begin(), strands.end());
    if (grab_) groom::update_grab(*sim_, *grab_, grab_->target);
  } else {
    Hairstyle h;
    h.id = "grown-" + region;
    h.source = StyleSource::procedural;
    h.strands = std::move(strands);
    rebuild(h);
    selected_style_ = h.id;
  }
  dirty_ = true;
}

void Session::set_params(const json& b) {
  sim::SimConfig next = cfg_;
  const auto num = [&](const char* key, double& field) {
    if (b.contains(key)) field = b[key].get<double>();
  };
  num("global_damping", next.global_damping);
  num("grid_blend", next.grid_blend);
  num("repulsion_gain", next.repulsion_gain);
  num("biphasic_ratio", next.biphasic_ratio);
  num("collision_friction", next.collision_friction);
  num("wind_drag", next.wind_drag);
  if (b.contains("gravity")) next.gravity = protocol::read_vec3(b, "gravity");
  bool springs_changed = false;
  for (const char* group : {"stiffness", "damping"}) {
    if (!b.contains(group)) continue;
    for (const auto& [kind, value] : b[group].items()) {
      auto& kp = kind_params(next, kind);
      (group[0] == 's' ? kp.stiffness : kp.damping) = value.get<double>();
      springs_changed = true;
    }
  }
  sim::validate(next);
  cfg_ = next;
  if (sim_ && springs_changed) {
    for (auto& sp : sim_->springs) {
      const auto& kp = cfg_.params(sp.kind);
      sp.stiffness = kp.stiffness;
      sp.damping = kp.damping;
    }
    sim::reindex(*sim_);
    sim::set_head_transform(*sim_, sim_->head_transform);
  }
}

void Session::render(const RenderAttributes& attrs, const json& body, const json& id) {
  if (!sim_) throw Error(ErrorCode::InvalidState, "no style is loaded");
  if (!generation_) throw Error(ErrorCode::ServiceUnavailable, "no generation backend is configured");
  const std::string prompt = imaging::compose_prompt(attrs);

  imaging::Camera cam;
  generation::GenerationRequest req;
  req.prompt = prompt;
  if (body.contains("camera")) {
    const json& c = body["camera"];
    if (c.contains("eye")) cam.eye = protocol::read_vec3(c, "eye");
    if (c.contains("target")) cam.target = protocol::read_vec3(c, "target");
    if (c.contains("fov")) cam.fov_y_deg = c["fov"].get<double>();
  }
  if (body.contains("width")) req.width = body["width"].get<int>();
  if (body.contains("height")) req.height = body["height"].get<int>();
  if (body.contains("seed")) req.seed = body["seed"].get<std::uint64_t>();
  cam.width = req.width;
  cam.height = req.height;
  imaging::validate(cam);

  const std::uint64_t n = ++render_seq_;
  auto snapshot = std::make_shared<Hairstyle>(sim::to_hairstyle(*sim_, selected_style_));
  std::shared_ptr<const HeadMesh> head;
  if (ctx_->head) head = std::make_shared<HeadMesh>(transformed(*ctx_->head, head_transform_));

  // Edge extraction runs on the worker so the loop keeps its cadence.
  worker_->post([this, n, id, cam, snapshot, head, req = std::move(req)]() mutable {
    const auto tag = [n, id](json e) {
      e["render"] = n;
      if (!id.is_null()) e["id"] = id;
      return e;
    };
    try {
      req.edge_map = imaging::canny(imaging::rasterize_strands(*snapshot, head.get(), cam));
      emit(tag({{"type", "render_progress"}, {"stage", "edges"}}));
      const std::string prompt = req.prompt;
      emit(tag({{"type", "render_progress"}, {"stage", "queued"}}));
      generation_->submit(
          std::move(req),
          [this, tag, prompt](std::uint64_t, generation::GenerationOutcome outcome) {
            if (const auto* err = std::get_if<Error>(&outcome)) {
              emit(tag(protocol::error_event(err->code(), err->what())));
              return;
            }
            const auto& img = std::get<generation::ImageResult>(outcome);
            emit(tag({{"type", "render_done"},
                      {"prompt", prompt},
                      {"latency_s", img.latency_s},
                      {"png_base64", base64(img.png)}}));
          },
          [this, tag](std::uint64_t) { emit(tag({{"type", "render_progress"}, {"stage", "generating"}})); });
    } catch (const Error& e) {
      emit(tag(protocol::error_event(e.code(), e.what())));
    }
  });
}

}  // namespace hairforge::service
