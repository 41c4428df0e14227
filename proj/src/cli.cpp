#include "hairforge/cli.hpp"

#include "hairforge/assets.hpp"
#include "hairforge/fixtures.hpp"
#include "hairforge/growth.hpp"
#include "hairforge/head.hpp"
#include "hairforge/imaging.hpp"
#include "hairforge/server.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace hairforge::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

Vec3 parse_vec3(const std::string& text, const std::string& flag) {
  std::stringstream ss(text);
  std::string part;
  std::vector<double> v;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "expected x,y,z but got '" + text + "'");
    }
  }
  if (v.size() != 3) throw CLI::ValidationError(flag, "expected x,y,z but got '" + text + "'");
  return {v[0], v[1], v[2]};
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::stringstream ss(text);
  std::string part;
  std::vector<double> v;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "bad number '" + part + "'");
    }
  }
  if (v.empty()) throw CLI::ValidationError(flag, "empty list");
  return v;
}

std::string getenv_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::string format_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct GrowFlags {
  std::string root = "0,9,0";
  std::string dir = "0,1,0";
  std::string params_file;
  std::optional<double> p_gamma_cap, p_gravity, p_spiral, p_helix_radius, p_freq, segment_scale,
      perturbation_scale;
  std::optional<int> steps;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> sweep;
};

growth::GrowthParams growth_params(const GrowFlags& f) {
  growth::GrowthParams p;
  if (!f.params_file.empty()) {
    std::ifstream in(f.params_file);
    if (!in) throw Error(ErrorCode::IoError, "cannot read params file '" + f.params_file + "'");
    json doc = json::parse(in, nullptr, false);
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "params file must hold a JSON object");
    const auto num = [&](const char* key, double& field) {
      if (!doc.contains(key)) return;
      if (!doc[key].is_number()) throw Error(ErrorCode::InvalidArgument, std::string("param '") + key + "' must be a number");
      field = doc[key].get<double>();
    };
    num("p_gamma_cap", p.p_gamma_cap);
    num("p_gravity", p.p_gravity);
    num("p_spiral", p.p_spiral);
    num("p_helix_radius", p.p_helix_radius);
    num("p_freq", p.p_freq);
    num("segment_scale", p.segment_scale);
    num("perturbation_scale", p.perturbation_scale);
    if (doc.contains("steps")) {
      if (!doc["steps"].is_number_integer()) throw Error(ErrorCode::InvalidArgument, "param 'steps' must be an integer");
      p.steps = doc["steps"].get<int>();
    }
  }
  if (f.p_gamma_cap) p.p_gamma_cap = *f.p_gamma_cap;
  if (f.p_gravity) p.p_gravity = *f.p_gravity;
  if (f.p_spiral) p.p_spiral = *f.p_spiral;
  if (f.p_helix_radius) p.p_helix_radius = *f.p_helix_radius;
  if (f.p_freq) p.p_freq = *f.p_freq;
  if (f.segment_scale) p.segment_scale = *f.segment_scale;
  if (f.perturbation_scale) p.perturbation_scale = *f.perturbation_scale;
  if (f.steps) p.steps = *f.steps;
  growth::validate(p);
  return p;
}

// The seed jitters the initial direction the same way root sampling does.
Vec3 seeded_direction(const Vec3& dir, const growth::GrowthParams& p, std::uint64_t seed) {
  growth::SeededUniform rng(seed);
  Vec3 jitter;
  for (int k = 0; k < 3; ++k) jitter[k] = 2.0 * rng() - 1.0;
  return dir + p.perturbation_scale * jitter;
}

int cmd_grow(const GrowFlags& f, std::ostream& out) {
  const auto params = growth_params(f);
  const Vec3 root = parse_vec3(f.root, "--root");
  const Vec3 dir = seeded_direction(parse_vec3(f.dir, "--dir"), params, f.seed);
  if (f.sweep.empty()) {
    Hairstyle h;
    h.id = fs::path(f.out).stem().string();
    h.source = StyleSource::procedural;
    h.strands.push_back(growth::grow_strand(root, dir, params));
    assets::write_hairstyle(h, f.out);
    out << "wrote " << f.out << " (" << h.strands.front().size() << " vertices)\n";
    return kOk;
  }
  std::vector<double> ph, pg;
  for (const auto& item : f.sweep) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--sweep", "expected key=v1,v2,... but got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const auto values = parse_list(item.substr(eq + 1), "--sweep");
    if (key == "ph") ph = values;
    else if (key == "pgamma") pg = values;
    else throw CLI::ValidationError("--sweep", "unknown sweep key '" + key + "' (use ph or pgamma)");
  }
  if (ph.empty()) ph = {params.p_helix_radius};
  if (pg.empty()) pg = {params.p_gravity};
  const auto grid = growth::sweep_grid(root, dir, params, ph, pg);
  fs::create_directories(f.out);
  json manifest = {{"root", {root.x(), root.y(), root.z()}},
                   {"dir0", {dir.x(), dir.y(), dir.z()}},
                   {"seed", f.seed},
                   {"cells", json::array()}};
  for (std::size_t i = 0; i < ph.size(); ++i) {
    for (std::size_t j = 0; j < pg.size(); ++j) {
      Hairstyle h;
      h.id = "ph" + format_value(ph[i]) + "_pgamma" + format_value(pg[j]);
      h.source = StyleSource::procedural;
      h.strands.push_back(grid.cells[i][j]);
      const std::string file = h.id + ".hair";
      assets::write_hairstyle(h, (fs::path(f.out) / file).string());
      manifest["cells"].push_back({{"file", file}, {"p_helix_radius", ph[i]}, {"p_gravity", pg[j]}});
    }
  }
  std::ofstream((fs::path(f.out) / "manifest.json").string()) << manifest.dump(2) << '\n';
  out << "wrote " << ph.size() * pg.size() << " strands to " << f.out << "\n";
  return kOk;
}

struct SimFlags {
  std::string in;
  std::string fixture;
  int steps = 600;
  double dt = 1.0 / 600.0;
  std::optional<double> wind;
  std::string wind_dir = "1,0,0";
  double gust = 0.0;
  std::string gravity = "0,-981,0";
  bool no_gravity = false;
  bool no_head = false;
  std::string out;
  std::string trajectory;
  int record_every = 10;
  bool json_out = false;
};

int cmd_simulate(const SimFlags& f, std::ostream& out, std::ostream& err) {
  if (f.in.empty() == f.fixture.empty()) throw CLI::ValidationError("--in", "give exactly one of --in or --fixture");
  if (f.steps < 0) throw CLI::ValidationError("--steps", "must be >= 0");
  if (f.record_every < 1) throw CLI::ValidationError("--record-every", "must be >= 1");
  Hairstyle h;
  if (!f.in.empty()) {
    h = assets::read_hairstyle(f.in);
  } else if (f.fixture == "pendulum") {
    h = fixtures::make_pendulum();
  } else {
    const auto& recipes = fixtures::database_recipes();
    const auto it = std::find_if(recipes.begin(), recipes.end(), [&](const auto& r) { return r.id == f.fixture; });
    if (it == recipes.end()) throw Error(ErrorCode::NotFound, "no fixture named '" + f.fixture + "'");
    h = fixtures::make_style(*it, *fixtures::default_head());
  }
  const auto violations = validate_hairstyle(h);
  if (!violations.empty()) {
    err << "error: input hairstyle invalid: " << violations.front().rule << " " << violations.front().detail << "\n";
    return kValidation;
  }

  sim::SimConfig cfg;
  cfg.dt = f.dt;
  cfg.gravity = f.no_gravity ? Vec3::Zero() : parse_vec3(f.gravity, "--gravity");
  auto state = sim::build_sim(h, f.no_head || f.fixture == "pendulum" ? nullptr : fixtures::default_head(), cfg);
  if (f.wind) {
    sim::WindField w;
    w.enabled = true;
    w.strength = *f.wind;
    w.direction = parse_vec3(f.wind_dir, "--wind-dir").normalized();
    w.gust_amplitude = f.gust;
    sim::set_wind(state, w);
  }

  std::ofstream traj;
  if (!f.trajectory.empty()) {
    traj.open(f.trajectory, std::ios::binary);
    if (!traj) throw Error(ErrorCode::IoError, "cannot write '" + f.trajectory + "'");
  }
  const auto record = [&](std::uint32_t id) {
    const auto bytes = protocol::encode_frame(id, state);
    traj.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  };
  const auto initial = state.positions;
  std::uint32_t frame = 0;
  if (traj.is_open()) record(frame++);
  for (int i = 0; i < f.steps; ++i) {
    try {
      sim::step(state, cfg, f.dt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalBlowup) throw;
      err << "error: numerical blowup at step " << i + 1 << ": " << e.what() << "\n";
      return kRuntime;
    }
    if (traj.is_open() && (i + 1) % f.record_every == 0) record(frame++);
  }
  double max_disp = 0.0;
  for (std::size_t p = 0; p < state.particle_count(); ++p) {
    max_disp = std::max(max_disp, (state.positions[p] - initial[p]).norm());
  }
  if (!f.out.empty()) {
    Hairstyle result = sim::to_hairstyle(state, fs::path(f.out).stem().string());
    assets::write_hairstyle(result, f.out);
  }
  const double ke = sim::kinetic_energy(state, cfg);
  if (f.json_out) {
    out << json{{"steps", f.steps},
                {"particles", state.particle_count()},
                {"max_displacement_cm", max_disp},
                {"kinetic_energy", ke},
                {"frames_recorded", frame}}
               .dump()
        << "\n";
  } else {
    out << "steps " << f.steps << ", particles " << state.particle_count() << ", max displacement "
        << std::setprecision(6) << max_disp << " cm, kinetic energy " << ke << "\n";
  }
  return kOk;
}

struct RetrieveFlags {
  std::string index;
  std::string query;
  int k = retrieval::kDefaultTopK;
  std::string provider;
  bool json_out = false;
};

int cmd_retrieve(const RetrieveFlags& f, std::ostream& out) {
  const auto index = assets::load_index(f.index);
  const auto provider = make_provider(f.provider.empty() ? index.provider_id : f.provider);
  const auto query = retrieval::embed_text(f.query, *provider);
  const auto result = retrieval::retrieve_top_k(index, query, f.k);
  if (f.json_out) {
    json list = json::array();
    for (const auto& e : result.entries) list.push_back({{"id", e.id}, {"score", e.score}});
    out << json{{"query", f.query}, {"provider", index.provider_id}, {"results", list}}.dump() << "\n";
  } else {
    int rank = 1;
    for (const auto& e : result.entries) {
      out << rank++ << "\t" << e.id << "\t" << std::fixed << std::setprecision(6) << e.score << "\n";
    }
  }
  return kOk;
}

struct IndexFlags {
  std::string db;
  std::string provider = "fallback";
  std::string out;
  std::string thumbnails;
};

int cmd_index_build(const IndexFlags& f, std::ostream& out, std::ostream& err) {
  const auto db = assets::load_database(f.db);
  for (const auto& note : db.skipped) err << "skipped: " << note << "\n";
  for (const auto& note : db.warnings) err << "warning: " << note << "\n";
  if (db.styles.empty()) throw Error(ErrorCode::NotFound, "no styles found in '" + f.db + "'");
  std::vector<std::pair<std::string, std::string>> captioned;
  for (const auto& h : db.styles) captioned.emplace_back(h.id, h.caption);
  const auto provider = make_provider(f.provider);
  const auto index = retrieval::build_index(captioned, *provider);
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  assets::save_index(index, f.out);

  const fs::path thumbs = f.thumbnails.empty() ? fs::path(f.out).parent_path() / "thumbnails" : fs::path(f.thumbnails);
  fs::create_directories(thumbs);
  const auto head = fixtures::default_head();
  for (const auto& h : db.styles) {
    assets::write_file((thumbs / (h.id + ".png")).string(), service::render_thumbnail(h, head.get()));
  }
  out << "indexed " << index.size() << " styles (" << index.provider_id << ", dim " << index.dim() << ") into "
      << f.out << "; thumbnails in " << thumbs.string() << "\n";
  return kOk;
}

struct EdgeFlags {
  std::string in;
  std::string out;
  double sigma = imaging::kCannySigma;
  double low = imaging::kCannyLow;
  double high = imaging::kCannyHigh;
};

int cmd_edges(const EdgeFlags& f, std::ostream& out) {
  const auto img = imaging::decode_png(assets::read_file(f.in));
  const auto edges = imaging::canny(img, f.sigma, f.low, f.high);
  assets::write_file(f.out, imaging::encode_png(edges));
  const auto on = std::count(edges.data.begin(), edges.data.end(), std::uint8_t{255});
  out << "wrote " << f.out << " (" << edges.width << "x" << edges.height << ", " << on << " edge pixels)\n";
  return kOk;
}

struct BenchFlags {
  std::vector<int> strands = {2000};
  int vertices = 16;
  int frames = 60;
  int warmup = 5;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  out << bench_csv_header() << "\n";
  for (int n : f.strands) {
    if (n < 0) throw CLI::ValidationError("--strands", "must be >= 0");
    out << to_csv(bench(n, f.vertices, f.frames, f.warmup)) << "\n" << std::flush;
  }
  return kOk;
}

int cmd_validate(const std::string& path, std::ostream& out) {
  const auto h = assets::read_hairstyle(path);
  const auto violations = validate_hairstyle(h);
  for (const auto& v : violations) {
    out << "violation: " << v.rule;
    if (v.strand) out << " (strand " << *v.strand << ")";
    if (!v.detail.empty()) out << ": " << v.detail;
    out << "\n";
  }
  if (!violations.empty()) return kValidation;
  out << path << ": ok, " << h.strands.size() << " strands, " << h.vertex_count() << " vertices\n";
  return kOk;
}

int cmd_serve(const ServeOptions& opts, const std::string& address, int port, double fps, std::ostream& out,
              std::ostream& err) {
  auto ctx = make_context(opts, err);
  service::ServerConfig cfg;
  cfg.address = address;
  cfg.port = static_cast<unsigned short>(port);
  cfg.frame_hz = fps;
  service::Server server(ctx, cfg);
  const auto bound = server.start();
  out << "listening on " << address << ":" << bound << "\n" << std::flush;
  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  out << "stopped\n";
  return kOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidHairstyle:
    case ErrorCode::EmptySelection:
    case ErrorCode::NonFiniteInput:
    case ErrorCode::NonUnitDirection:
    case ErrorCode::NonRigidTransform:
    case ErrorCode::EmptyText:
    case ErrorCode::BadThresholds:
    case ErrorCode::EmptyImage:
    case ErrorCode::DegenerateCamera:
    case ErrorCode::AllEmpty:
    case ErrorCode::DuplicateId:
      return kValidation;
    default:
      return kRuntime;
  }
}

BenchRow bench(int strands, int vertices, int frames, int warmup) {
  BenchRow row;
  row.strands = strands;
  row.vertices = vertices;
  row.frames = frames;
  const auto head = fixtures::default_head();
  sim::SimConfig cfg;
  sim::SimState state;
  if (strands > 0) state = sim::build_sim(fixtures::make_bench_style(strands, vertices, *head), head, cfg);
  row.particles = state.particle_count();
  const auto frame = [&] {
    if (strands > 0) sim::step_frame(state, cfg);
  };
  for (int i = 0; i < warmup; ++i) frame();
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    frame();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  if (!ms.empty()) {
    double sum = 0.0;
    for (double v : ms) sum += v;
    row.mean_ms = sum / static_cast<double>(ms.size());
    row.p50_ms = percentile(ms, 0.5);
    row.p90_ms = percentile(ms, 0.9);
    row.p99_ms = percentile(ms, 0.99);
    row.max_ms = *std::max_element(ms.begin(), ms.end());
  }
  return row;
}

std::string bench_csv_header() { return "strands,vertices,particles,frames,mean_ms,p50_ms,p90_ms,p99_ms,max_ms"; }

std::string to_csv(const BenchRow& r) {
  std::ostringstream os;
  os << r.strands << ',' << r.vertices << ',' << r.particles << ',' << r.frames << std::fixed << std::setprecision(3)
     << ',' << r.mean_ms << ',' << r.p50_ms << ',' << r.p90_ms << ',' << r.p99_ms << ',' << r.max_ms;
  return os.str();
}

Endpoint parse_url(const std::string& url) {
  constexpr std::string_view scheme = "http://";
  if (!url.starts_with(scheme)) throw Error(ErrorCode::InvalidArgument, "only http:// URLs are supported: '" + url + "'");
  Endpoint ep;
  std::string rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    ep.path = rest.substr(slash);
    rest.resize(slash);
  }
  const auto colon = rest.rfind(':');
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      ep.port = std::stoi(rest.substr(colon + 1), &used);
      if (used != rest.size() - colon - 1 || ep.port <= 0 || ep.port > 65535) throw std::out_of_range(rest);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad port in URL '" + url + "'");
    }
    rest.resize(colon);
  }
  if (rest.empty()) throw Error(ErrorCode::InvalidArgument, "missing host in URL '" + url + "'");
  ep.host = rest;
  return ep;
}

std::shared_ptr<retrieval::EmbeddingProvider> make_provider(const std::string& name) {
  if (name == "fallback") return std::make_shared<retrieval::HashingProvider>();
  constexpr std::string_view hashed = "fallback-hash-";
  if (name.starts_with(hashed)) {
    int dim = 0;
    try {
      dim = std::stoi(name.substr(hashed.size()));
    } catch (const std::exception&) {
    }
    if (dim < 1) throw Error(ErrorCode::InvalidArgument, "bad provider '" + name + "'");
    return std::make_shared<retrieval::HashingProvider>(dim);
  }
  const auto ep = parse_url(name);
  retrieval::HttpProviderConfig cfg;
  cfg.host = ep.host;
  cfg.port = ep.port;
  cfg.path = ep.path;
  return std::make_shared<retrieval::HttpEmbeddingProvider>(cfg);
}

std::shared_ptr<service::ServiceContext> make_context(const ServeOptions& opts, std::ostream& log) {
  auto ctx = std::make_shared<service::ServiceContext>();
  ctx->head = fixtures::default_head();
  if (opts.assets) {
    auto db = assets::load_database(*opts.assets);
    for (const auto& note : db.skipped) log << "skipped: " << note << "\n";
    ctx->styles = std::move(db.styles);
  } else {
    for (const auto& r : fixtures::database_recipes()) ctx->styles.push_back(fixtures::make_style(r, *ctx->head));
  }

  ctx->provider = make_provider(opts.embed);
  if (opts.index) {
    ctx->index = assets::load_index(*opts.index, ctx->provider->id());
  } else {
    std::vector<std::pair<std::string, std::string>> captioned;
    for (const auto& h : ctx->styles) captioned.emplace_back(h.id, h.caption);
    ctx->index = retrieval::build_index(captioned, *ctx->provider);
  }

  std::vector<fs::path> thumb_dirs;
  if (opts.index) thumb_dirs.push_back(fs::path(*opts.index).parent_path() / "thumbnails");
  if (opts.assets) thumb_dirs.push_back(fs::path(*opts.assets) / "thumbnails");
  for (const auto& h : ctx->styles) {
    for (const auto& dir : thumb_dirs) {
      const auto file = dir / (h.id + ".png");
      if (fs::exists(file)) {
        ctx->thumbnails[h.id] = assets::read_file(file.string());
        break;
      }
    }
    if (!ctx->thumbnails.contains(h.id)) ctx->thumbnails[h.id] = service::render_thumbnail(h, ctx->head.get());
  }

  if (opts.gen == "mock") {
    ctx->generator = std::make_shared<generation::MockGenerationBackend>(generation::placeholder_png(512, 512));
  } else {
    const auto ep = parse_url(opts.gen);
    generation::HttpGenerationConfig cfg;
    cfg.host = ep.host;
    cfg.port = ep.port;
    if (ep.path != "/") cfg.path = ep.path;
    ctx->generator = std::make_shared<generation::HttpGenerationClient>(cfg);
  }
  log << "loaded " << ctx->styles.size() << " styles, index " << ctx->index.provider_id << " x" << ctx->index.size()
      << ", generation " << opts.gen << "\n";
  return ctx;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hairforge: hair authoring engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hairforge 0.1.0");

  GrowFlags grow;
  auto* g = app.add_subcommand("grow", "Grow one strand (or a parameter sweep) procedurally");
  g->add_option("--root", grow.root, "Root position x,y,z (cm)")->capture_default_str();
  g->add_option("--dir", grow.dir, "Initial direction x,y,z")->capture_default_str();
  g->add_option("--params", grow.params_file, "JSON file with growth parameters");
  g->add_option("--p-gamma-cap", grow.p_gamma_cap, "Floor on the gravity weight");
  g->add_option("--p-gravity", grow.p_gravity, "Per-step gravity gain");
  g->add_option("--p-spiral", grow.p_spiral, "Spiral strength");
  g->add_option("--p-helix-radius", grow.p_helix_radius, "Helix radius");
  g->add_option("--p-freq", grow.p_freq, "Helix frequency (radians per step)");
  g->add_option("--steps", grow.steps, "Number of growth steps T");
  g->add_option("--segment-scale", grow.segment_scale, "Segment length scale");
  g->add_option("--perturbation-scale", grow.perturbation_scale, "Seeded jitter of the initial direction");
  g->add_option("--seed", grow.seed, "Seed for the direction jitter")->capture_default_str();
  g->add_option("--out", grow.out, "Output .hair file, or directory with --sweep")->required();
  g->add_option("--sweep", grow.sweep, "Grid sweep, e.g. ph=0.2,0.5,1.0 pgamma=0.0,0.05,0.1");

  SimFlags simf;
  auto* s = app.add_subcommand("simulate", "Step a hairstyle offline");
  s->add_option("--in", simf.in, "Input .hair file");
  s->add_option("--fixture", simf.fixture, "Built-in fixture: pendulum or a database style id");
  s->add_option("--steps", simf.steps, "Number of steps")->capture_default_str();
  s->add_option("--dt", simf.dt, "Step length (s)")->capture_default_str();
  s->add_option("--wind", simf.wind, "Enable wind with this mean speed (cm/s)");
  s->add_option("--wind-dir", simf.wind_dir, "Wind direction x,y,z")->capture_default_str();
  s->add_option("--gust", simf.gust, "Gust amplitude in [0,1]")->capture_default_str();
  s->add_option("--gravity", simf.gravity, "Gravity x,y,z (cm/s^2)")->capture_default_str();
  s->add_flag("--no-gravity", simf.no_gravity, "Disable gravity");
  s->add_flag("--no-head", simf.no_head, "Disable head collision");
  s->add_option("--out", simf.out, "Write the final state as .hair");
  s->add_option("--trajectory", simf.trajectory, "Write frame packets to this file");
  s->add_option("--record-every", simf.record_every, "Steps between recorded frames")->capture_default_str();
  s->add_flag("--json", simf.json_out, "Machine-readable summary");

  RetrieveFlags ret;
  auto* r = app.add_subcommand("retrieve", "Top-k styles for a text query");
  r->add_option("--index", ret.index, "Index file")->required();
  r->add_option("--query", ret.query, "Query text")->required();
  r->add_option("--k", ret.k, "Number of results")->capture_default_str();
  r->add_option("--provider", ret.provider, "fallback or http URL (defaults to the index's provider)");
  r->add_flag("--json", ret.json_out, "Machine-readable output");

  BenchFlags benchf;
  auto* b = app.add_subcommand("bench", "Simulation frame timings as CSV");
  b->add_option("--strands", benchf.strands, "Strand counts (repeatable or comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  b->add_option("--vertices", benchf.vertices, "Vertices per strand")->capture_default_str();
  b->add_option("--frames", benchf.frames, "Measured frames")->capture_default_str();
  b->add_option("--warmup", benchf.warmup, "Unmeasured frames")->capture_default_str();

  EdgeFlags edge;
  auto* e = app.add_subcommand("edges", "Canny edge map of a PNG");
  e->add_option("--in", edge.in, "Input PNG")->required();
  e->add_option("--out", edge.out, "Output PNG")->required();
  e->add_option("--sigma", edge.sigma, "Gaussian sigma")->capture_default_str();
  e->add_option("--low", edge.low, "Low threshold")->capture_default_str();
  e->add_option("--high", edge.high, "High threshold")->capture_default_str();

  IndexFlags idx;
  auto* i = app.add_subcommand("index", "Embedding index management");
  i->require_subcommand(1);
  auto* ib = i->add_subcommand("build", "Embed every caption of a database directory");
  ib->add_option("--db", idx.db, "Database directory")->required();
  ib->add_option("--provider", idx.provider, "fallback or http URL")->capture_default_str();
  ib->add_option("--out", idx.out, "Output index file")->required();
  ib->add_option("--thumbnails", idx.thumbnails, "Thumbnail directory (default: next to the index)");

  std::string validate_path;
  auto* v = app.add_subcommand("validate", "Check a .hair file against the hairstyle invariants");
  v->add_option("--in", validate_path, "Input .hair file")->required();

  std::string fixtures_dir;
  auto* fx = app.add_subcommand("fixtures", "Write the built-in fixture database");
  fx->add_option("--out", fixtures_dir, "Output directory")->required();

  ServeOptions serve;
  std::string address = getenv_or("HAIRFORGE_ADDRESS", "127.0.0.1");
  int port = 8080;
  double fps = 60.0;
  serve.embed = getenv_or("HAIRFORGE_EMBED_URL", "fallback");
  serve.gen = getenv_or("HAIRFORGE_GEN_URL", "mock");
  if (const char* a = std::getenv("HAIRFORGE_ASSETS")) serve.assets = a;
  if (const char* x = std::getenv("HAIRFORGE_INDEX")) serve.index = x;
  std::string port_env = getenv_or("HAIRFORGE_PORT", "");
  auto* sv = app.add_subcommand("serve", "Run the session service");
  sv->add_option("--address", address, "Listen address")->capture_default_str();
  sv->add_option("--port", port, "Port (0 picks a free one)");
  sv->add_option("--assets", serve.assets, "Database directory (built-in fixtures when absent)");
  sv->add_option("--index", serve.index, "Index file (built at startup when absent)");
  sv->add_option("--embed-url", serve.embed, "fallback or embedding service URL")->capture_default_str();
  sv->add_option("--gen-url", serve.gen, "mock or generation service URL")->capture_default_str();
  sv->add_option("--fps", fps, "Display frame rate")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return cmd_grow(grow, out);
    if (*s) return cmd_simulate(simf, out, err);
    if (*r) return cmd_retrieve(ret, out);
    if (*b) return cmd_bench(benchf, out);
    if (*e) return cmd_edges(edge, out);
    if (*ib) return cmd_index_build(idx, out, err);
    if (*v) return cmd_validate(validate_path, out);
    if (*fx) {
      const auto ids = fixtures::write_database(fixtures_dir);
      out << "wrote " << ids.size() << " styles to " << fixtures_dir << "\n";
      return kOk;
    }
    if (*sv) {
      if (sv->count("--port") == 0 && !port_env.empty()) {
        try {
          port = std::stoi(port_env);
        } catch (const std::exception&) {
          err << "error: HAIRFORGE_PORT is not a number\n";
          return kUsage;
        }
      }
      if (port < 0 || port > 65535) {
        err << "error: port out of range\n";
        return kUsage;
      }
      return cmd_serve(serve, address, port, fps, out, err);
    }
  } catch (const CLI::ValidationError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const Error& ex) {
    err << "error [" << to_string(ex.code()) << "]: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace hairforge::cli
