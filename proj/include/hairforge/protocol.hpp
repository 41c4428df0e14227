#pragma once

// Wire formats between the session server and its clients.
//
// Frames (binary, little-endian):
//   "HFRM" | u32 frame_id | u32 strand_count |
//   strand_count x ( u32 vertex_count | vertex_count x f32[3] )
//
// Commands and events are JSON objects with a string "type" field. Commands
// may carry an "id" (string or number) that replies echo back.

#include "hairforge/error.hpp"
#include "hairforge/sim.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hairforge::protocol {

using json = nlohmann::json;

struct FramePacket {
  std::uint32_t frame_id = 0;
  std::vector<std::vector<std::array<float, 3>>> strands;

  bool operator==(const FramePacket&) const = default;
};

// Every stride-th span (0, stride, 2*stride, ...), so ceil(spans / stride)
// strands. Throws InvalidArgument for stride < 1.
std::vector<std::uint8_t> encode_frame(std::uint32_t frame_id, const sim::SimState& state, int stride = 1);
std::vector<std::uint8_t> encode_frame(const FramePacket& packet);

// Throws BadMagic or TruncatedFile; trailing bytes are rejected as well.
FramePacket decode_frame(std::span<const std::uint8_t> bytes);

enum class CommandType {
  chat,
  select_style,
  sim_control,
  wind,
  head_transform,
  grab_begin,
  grab_move,
  grab_end,
  trim,
  grow,
  set_params,
  render,
  set_stride,
};

std::string_view to_string(CommandType type);

struct Command {
  CommandType type = CommandType::chat;
  json body;  // the whole validated object
  json id;    // null when absent
};

// Parses and schema-checks one command. Throws MalformedCommand with a message
// naming the offending field; the error carries no partial state.
Command parse_command(std::string_view text);

// Event builders.
json ack_event(const Command& cmd, json detail = json::object());
json error_event(ErrorCode code, const std::string& message, const json& id = nullptr);

// Field readers used by the session; all throw MalformedCommand.
Vec3 read_vec3(const json& obj, const char* key);
double read_number(const json& obj, const char* key);
std::string read_string(const json& obj, const char* key);

}  // namespace hairforge::protocol
