#pragma once

// On-disk formats, little-endian throughout.
//
// Hairstyle (.hair):
//   "HAIR" | u32 version=1 | u32 strand_count
//   per strand: u32 vertex_count | vertex_count * (f32 x, f32 y, f32 z)
//
// Sidecar (.json): {"id": "...", "caption": "..."}
//
// Embedding index (.hidx):
//   "HIDX" | u32 version=1 | u32 len + provider_id bytes | u32 N | u32 D
//   | N*D f32 row-major | N * (u32 len + id bytes)

#include "hairforge/error.hpp"
#include "hairforge/model.hpp"
#include "hairforge/retrieval.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hairforge::assets {

inline constexpr std::uint32_t kHairVersion = 1;
inline constexpr std::uint32_t kIndexVersion = 1;

std::vector<std::uint8_t> encode_hairstyle(const Hairstyle& h);
// `name` only labels errors; the decoded id is left empty.
Hairstyle decode_hairstyle(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");

void write_hairstyle(const Hairstyle& h, const std::string& path);
// Id defaults to the file stem. Throws BadMagic, TruncatedFile, VersionUnsupported, IoError.
Hairstyle read_hairstyle(const std::string& path);

void write_sidecar(const Hairstyle& h, const std::string& path);

struct Database {
  std::vector<Hairstyle> styles;  // sorted by file name
  std::vector<std::string> skipped;  // one note per skipped file
  std::vector<std::string> warnings;
};

// Loads every <stem>.hair with a matching <stem>.json. Throws DuplicateId.
Database load_database(const std::string& dir);

std::vector<std::uint8_t> encode_index(const retrieval::EmbeddingIndex& index);
retrieval::EmbeddingIndex decode_index(std::span<const std::uint8_t> bytes,
                                       const std::optional<std::string>& expected_provider = std::nullopt);

void save_index(const retrieval::EmbeddingIndex& index, const std::string& path);
// Re-normalizes rows; throws ProviderMismatch when expected_provider differs.
retrieval::EmbeddingIndex load_index(const std::string& path,
                                     const std::optional<std::string>& expected_provider = std::nullopt);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace hairforge::assets
