#include "hairforge/protocol.hpp"

#include "hairforge/bytes.hpp"

#include <cmath>
#include <map>

namespace hairforge::protocol {

namespace {

constexpr std::string_view kFrameMagic = "HFRM";

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::MalformedCommand, msg); }

const std::map<std::string, CommandType, std::less<>>& command_names() {
  static const std::map<std::string, CommandType, std::less<>> names = {
      {"chat", CommandType::chat},
      {"select_style", CommandType::select_style},
      {"sim_control", CommandType::sim_control},
      {"wind", CommandType::wind},
      {"head_transform", CommandType::head_transform},
      {"grab_begin", CommandType::grab_begin},
      {"grab_move", CommandType::grab_move},
      {"grab_end", CommandType::grab_end},
      {"trim", CommandType::trim},
      {"grow", CommandType::grow},
      {"set_params", CommandType::set_params},
      {"render", CommandType::render},
      {"set_stride", CommandType::set_stride},
  };
  return names;
}

void need_number_array(const json& obj, const char* key, std::size_t n) {
  if (!obj.contains(key)) bad(std::string("missing field '") + key + "'");
  const json& v = obj[key];
  if (!v.is_array() || v.size() != n) bad(std::string("'") + key + "' must be an array of " + std::to_string(n) + " numbers");
  for (const auto& x : v) {
    if (!x.is_number() || !std::isfinite(x.get<double>())) bad(std::string("'") + key + "' must hold finite numbers");
  }
}

void opt_number_array(const json& obj, const char* key, std::size_t n) {
  if (obj.contains(key)) need_number_array(obj, key, n);
}

void need_number(const json& obj, const char* key) {
  if (!obj.contains(key)) bad(std::string("missing field '") + key + "'");
  const json& v = obj[key];
  if (!v.is_number() || !std::isfinite(v.get<double>())) bad(std::string("'") + key + "' must be a finite number");
}

void opt_number(const json& obj, const char* key) {
  if (obj.contains(key)) need_number(obj, key);
}

void opt_integer(const json& obj, const char* key, long long lo, long long hi) {
  if (!obj.contains(key)) return;
  const json& v = obj[key];
  if (!v.is_number_integer()) bad(std::string("'") + key + "' must be an integer");
  const long long x = v.is_number_unsigned() ? static_cast<long long>(std::min<std::uint64_t>(v.get<std::uint64_t>(), static_cast<std::uint64_t>(hi) + 1))
                                              : v.get<long long>();
  if (x < lo || x > hi) bad(std::string("'") + key + "' out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void need_string(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_string()) bad(std::string("field '") + key + "' must be a string");
}

void opt_object(const json& obj, const char* key) {
  if (obj.contains(key) && !obj[key].is_object()) bad(std::string("'") + key + "' must be an object");
}

void one_of(const json& obj, const char* key, std::initializer_list<std::string_view> values) {
  need_string(obj, key);
  const auto& s = obj[key].get_ref<const std::string&>();
  for (auto v : values) {
    if (s == v) return;
  }
  bad(std::string("unsupported ") + key + " '" + s + "'");
}

void check_kind_map(const json& obj, const char* key) {
  if (!obj.contains(key)) return;
  const json& m = obj[key];
  if (!m.is_object()) bad(std::string("'") + key + "' must be an object");
  for (const auto& [kind, value] : m.items()) {
    if (kind != "edge" && kind != "bend" && kind != "torsion" && kind != "aug_local" && kind != "aug_global") {
      bad(std::string("unknown spring kind '") + kind + "' in '" + key + "'");
    }
    if (!value.is_number() || !std::isfinite(value.get<double>()) || value.get<double>() < 0.0) {
      bad(std::string("'") + key + "." + kind + "' must be a finite number >= 0");
    }
  }
}

void check_schema(CommandType type, const json& c) {
  switch (type) {
    case CommandType::chat:
      need_string(c, "text");
      break;
    case CommandType::select_style:
      need_string(c, "style");
      break;
    case CommandType::sim_control:
      one_of(c, "action", {"start", "pause", "resume", "reset", "step"});
      break;
    case CommandType::wind:
      if (!c.contains("enabled") || !c["enabled"].is_boolean()) bad("field 'enabled' must be a boolean");
      opt_number(c, "strength");
      opt_number_array(c, "direction", 3);
      opt_number(c, "gust_amplitude");
      opt_number(c, "gust_frequency");
      opt_integer(c, "turbulence_seed", 0, std::numeric_limits<long long>::max());
      break;
    case CommandType::head_transform:
      if (!c.contains("matrix") && !c.contains("rotation") && !c.contains("translation")) {
        bad("head_transform needs 'matrix', or 'rotation' and/or 'translation'");
      }
      opt_number_array(c, "matrix", 16);
      opt_number_array(c, "rotation", 4);
      opt_number_array(c, "translation", 3);
      break;
    case CommandType::grab_begin:
      need_number_array(c, "origin", 3);
      need_number_array(c, "direction", 3);
      opt_number(c, "radius");
      break;
    case CommandType::grab_move:
      need_number_array(c, "target", 3);
      break;
    case CommandType::grab_end:
      break;
    case CommandType::trim: {
      one_of(c, "selector", {"sphere", "below_plane", "tail"});
      const auto& sel = c["selector"].get_ref<const std::string&>();
      if (sel == "sphere") {
        need_number_array(c, "center", 3);
        need_number(c, "radius");
      } else if (sel == "below_plane") {
        need_number_array(c, "point", 3);
        need_number_array(c, "normal", 3);
      } else {
        if (!c.contains("strand") || !c.contains("index")) bad("tail trim needs 'strand' and 'index'");
        opt_integer(c, "strand", 0, std::numeric_limits<int>::max());
        opt_integer(c, "index", 0, std::numeric_limits<int>::max());
      }
      break;
    }
    case CommandType::grow:
      one_of(c, "region", {"scalp", "beard", "mustache"});
      opt_integer(c, "count", 0, 20000);
      opt_integer(c, "seed", 0, std::numeric_limits<long long>::max());
      opt_object(c, "params");
      if (c.contains("params")) {
        for (const auto& [key, value] : c["params"].items()) {
          if (!value.is_number() || !std::isfinite(value.get<double>())) bad("growth param '" + key + "' must be a finite number");
        }
      }
      if (c.contains("append") && !c["append"].is_boolean()) bad("'append' must be a boolean");
      break;
    case CommandType::set_params:
      for (const char* key : {"global_damping", "grid_blend", "repulsion_gain", "biphasic_ratio",
                              "collision_friction", "wind_drag"}) {
        opt_number(c, key);
      }
      opt_number_array(c, "gravity", 3);
      check_kind_map(c, "stiffness");
      check_kind_map(c, "damping");
      break;
    case CommandType::render:
      opt_object(c, "attributes");
      if (c.contains("attributes")) {
        for (const auto& [key, value] : c["attributes"].items()) {
          if (!value.is_string()) bad("render attribute '" + key + "' must be a string");
        }
      }
      opt_object(c, "camera");
      if (c.contains("camera")) {
        opt_number_array(c["camera"], "eye", 3);
        opt_number_array(c["camera"], "target", 3);
        opt_number(c["camera"], "fov");
      }
      opt_integer(c, "seed", 0, std::numeric_limits<long long>::max());
      opt_integer(c, "width", 64, 2048);
      opt_integer(c, "height", 64, 2048);
      break;
    case CommandType::set_stride:
      if (!c.contains("stride")) bad("missing field 'stride'");
      opt_integer(c, "stride", 1, 1 << 20);
      break;
  }
}

}  // namespace

std::string_view to_string(CommandType type) {
  for (const auto& [name, t] : command_names()) {
    if (t == type) return name;
  }
  return "unknown";
}

std::vector<std::uint8_t> encode_frame(std::uint32_t frame_id, const sim::SimState& state, int stride) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "frame stride must be >= 1");
  const std::size_t spans = state.strands.size();
  const std::size_t sent = (spans + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
  ByteWriter w;
  w.reserve(12 + 4 * sent + 12 * state.particle_count() / static_cast<std::size_t>(stride) + 64);
  w.bytes(kFrameMagic);
  w.u32(frame_id);
  w.u32(static_cast<std::uint32_t>(sent));
  for (std::size_t i = 0; i < spans; i += static_cast<std::size_t>(stride)) {
    const auto& span = state.strands[i];
    w.u32(static_cast<std::uint32_t>(span.particle_count));
    for (int k = 0; k < span.particle_count; ++k) {
      const Vec3& x = state.positions[static_cast<std::size_t>(span.first_particle + k)];
      w.f32(static_cast<float>(x.x()));
      w.f32(static_cast<float>(x.y()));
      w.f32(static_cast<float>(x.z()));
    }
  }
  return w.take();
}

std::vector<std::uint8_t> encode_frame(const FramePacket& packet) {
  ByteWriter w;
  w.bytes(kFrameMagic);
  w.u32(packet.frame_id);
  w.u32(static_cast<std::uint32_t>(packet.strands.size()));
  for (const auto& s : packet.strands) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (const auto& v : s) {
      for (float c : v) w.f32(c);
    }
  }
  return w.take();
}

FramePacket decode_frame(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::string magic;
  if (!r.bytes(4, magic)) throw Error(ErrorCode::TruncatedFile, "frame shorter than its header");
  if (magic != kFrameMagic) throw Error(ErrorCode::BadMagic, "frame has bad magic");
  FramePacket p;
  std::uint32_t count = 0;
  if (!r.u32(p.frame_id) || !r.u32(count)) throw Error(ErrorCode::TruncatedFile, "frame shorter than its header");
  p.strands.reserve(std::min<std::size_t>(count, r.remaining() / 4));
  for (std::uint32_t s = 0; s < count; ++s) {
    std::uint32_t nv = 0;
    if (!r.u32(nv) || r.remaining() / 12 < nv) {
      throw Error(ErrorCode::TruncatedFile, "frame truncated in strand " + std::to_string(s));
    }
    std::vector<std::array<float, 3>> strand(nv);
    for (auto& v : strand) {
      r.f32(v[0]);
      r.f32(v[1]);
      r.f32(v[2]);
    }
    p.strands.push_back(std::move(strand));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::TruncatedFile, "frame has trailing bytes");
  return p;
}

Command parse_command(std::string_view text) {
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) bad("command is not valid JSON");
  if (!doc.is_object()) bad("command must be a JSON object");
  Command cmd;
  if (doc.contains("id")) {
    const json& id = doc["id"];
    if (!id.is_string() && !id.is_number_integer()) bad("'id' must be a string or integer");
    cmd.id = id;
  }
  if (!doc.contains("type") || !doc["type"].is_string()) bad("command needs a string 'type'");
  const auto& type = doc["type"].get_ref<const std::string&>();
  const auto it = command_names().find(type);
  if (it == command_names().end()) bad("unknown command type '" + type + "'");
  cmd.type = it->second;
  check_schema(cmd.type, doc);
  cmd.body = std::move(doc);
  return cmd;
}

json ack_event(const Command& cmd, json detail) {
  json e = {{"type", "ack"}, {"command", std::string(to_string(cmd.type))}};
  if (!cmd.id.is_null()) e["id"] = cmd.id;
  if (detail.is_object()) {
    for (auto& [k, v] : detail.items()) e[k] = v;
  }
  return e;
}

json error_event(ErrorCode code, const std::string& message, const json& id) {
  json e = {{"type", "error"}, {"code", std::string(to_string(code))}, {"message", message}};
  if (!id.is_null()) e["id"] = id;
  return e;
}

Vec3 read_vec3(const json& obj, const char* key) {
  need_number_array(obj, key, 3);
  const json& v = obj[key];
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

double read_number(const json& obj, const char* key) {
  need_number(obj, key);
  return obj[key].get<double>();
}

std::string read_string(const json& obj, const char* key) {
  need_string(obj, key);
  return obj[key].get<std::string>();
}

}  // namespace hairforge::protocol
