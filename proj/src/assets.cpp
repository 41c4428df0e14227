#include "hairforge/assets.hpp"

#include "hairforge/bytes.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace hairforge::assets {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

std::vector<std::uint8_t> encode_hairstyle(const Hairstyle& h) {
  ByteWriter w;
  w.reserve(12 + 4 * h.strands.size() + 12 * h.vertex_count());
  w.bytes("HAIR");
  w.u32(kHairVersion);
  w.u32(static_cast<std::uint32_t>(h.strands.size()));
  for (const auto& s : h.strands) {
    w.u32(static_cast<std::uint32_t>(s.vertices.size()));
    for (const auto& v : s.vertices) {
      w.f32(static_cast<float>(v.x()));
      w.f32(static_cast<float>(v.y()));
      w.f32(static_cast<float>(v.z()));
    }
  }
  return w.take();
}

Hairstyle decode_hairstyle(std::span<const std::uint8_t> bytes, const std::string& name) {
  ByteReader r(bytes);
  std::string magic;
  if (!r.bytes(4, magic)) throw Error(ErrorCode::TruncatedFile, name + ": truncated header");
  if (magic != "HAIR") throw Error(ErrorCode::BadMagic, name + ": bad magic");
  std::uint32_t version = 0, count = 0;
  if (!r.u32(version) || !r.u32(count)) throw Error(ErrorCode::TruncatedFile, name + ": truncated header");
  if (version != kHairVersion) {
    throw Error(ErrorCode::VersionUnsupported, name + ": unsupported version " + std::to_string(version));
  }
  Hairstyle h;
  h.source = StyleSource::database;
  // each strand needs at least its 4-byte count
  h.strands.reserve(std::min<std::size_t>(count, r.remaining() / 4));
  for (std::uint32_t s = 0; s < count; ++s) {
    const auto truncated = [&] {
      return Error(ErrorCode::TruncatedFile, name + ": truncated in strand " + std::to_string(s));
    };
    std::uint32_t nv = 0;
    if (!r.u32(nv)) throw truncated();
    if (r.remaining() / 12 < nv) throw truncated();
    Strand strand;
    strand.vertices.resize(nv);
    for (auto& v : strand.vertices) {
      float x = 0, y = 0, z = 0;
      r.f32(x);
      r.f32(y);
      r.f32(z);
      v = Vec3(x, y, z);
    }
    h.strands.push_back(std::move(strand));
  }
  return h;
}

void write_hairstyle(const Hairstyle& h, const std::string& path) {
  write_file(path, encode_hairstyle(h));
}

Hairstyle read_hairstyle(const std::string& path) {
  Hairstyle h = decode_hairstyle(read_file(path), path);
  h.id = fs::path(path).stem().string();
  return h;
}

void write_sidecar(const Hairstyle& h, const std::string& path) {
  const json doc = {{"id", h.id}, {"caption", h.caption}};
  const std::string text = doc.dump(2) + "\n";
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Database load_database(const std::string& dir) {
  Database db;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".hair") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, std::string> owner;
  for (const auto& file : files) {
    fs::path sidecar = file;
    sidecar.replace_extension(".json");
    if (!fs::exists(sidecar)) {
      db.skipped.push_back(file.filename().string() + ": missing sidecar");
      continue;
    }
    json meta;
    try {
      const auto raw = read_file(sidecar.string());
      meta = json::parse(raw.begin(), raw.end());
    } catch (const json::exception& e) {
      db.skipped.push_back(sidecar.filename().string() + ": " + e.what());
      continue;
    }
    if (!meta.is_object() || !meta.contains("id") || !meta["id"].is_string()) {
      db.skipped.push_back(sidecar.filename().string() + ": missing string field 'id'");
      continue;
    }
    Hairstyle h = read_hairstyle(file.string());
    h.id = meta["id"].get<std::string>();
    if (meta.contains("caption") && meta["caption"].is_string()) h.caption = meta["caption"].get<std::string>();
    if (auto [it, fresh] = owner.emplace(h.id, file.filename().string()); !fresh) {
      throw Error(ErrorCode::DuplicateId,
                  "id '" + h.id + "' used by both " + it->second + " and " + file.filename().string());
    }
    if (word_count(h.caption) > kCaptionWordLimit) {
      db.warnings.push_back(h.id + ": caption exceeds " + std::to_string(kCaptionWordLimit) + " words");
    }
    db.styles.push_back(std::move(h));
  }
  return db;
}

std::vector<std::uint8_t> encode_index(const retrieval::EmbeddingIndex& index) {
  ByteWriter w;
  const auto n = static_cast<std::size_t>(index.size());
  const auto d = static_cast<std::size_t>(index.dim());
  w.reserve(32 + index.provider_id.size() + 4 * n * d + 16 * n);
  w.bytes("HIDX");
  w.u32(kIndexVersion);
  w.str(index.provider_id);
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(d));
  for (Eigen::Index i = 0; i < index.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < index.matrix.cols(); ++j) w.f32(static_cast<float>(index.matrix(i, j)));
  }
  for (const auto& id : index.ids) w.str(id);
  return w.take();
}

retrieval::EmbeddingIndex decode_index(std::span<const std::uint8_t> bytes,
                                       const std::optional<std::string>& expected_provider) {
  ByteReader r(bytes);
  const auto truncated = [] { return Error(ErrorCode::TruncatedFile, "index file truncated"); };
  std::string magic;
  if (!r.bytes(4, magic)) throw truncated();
  if (magic != "HIDX") throw Error(ErrorCode::BadMagic, "index file has bad magic");
  std::uint32_t version = 0, n = 0, d = 0;
  if (!r.u32(version)) throw truncated();
  if (version != kIndexVersion) {
    throw Error(ErrorCode::VersionUnsupported, "unsupported index version " + std::to_string(version));
  }
  retrieval::EmbeddingIndex index;
  if (!r.str(index.provider_id) || !r.u32(n) || !r.u32(d)) throw truncated();
  if (expected_provider && *expected_provider != index.provider_id) {
    throw Error(ErrorCode::ProviderMismatch,
                "index built by '" + index.provider_id + "', expected '" + *expected_provider + "'");
  }
  if (d > 0 && r.remaining() / 4 / d < n) throw truncated();
  index.matrix.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      float v = 0.0f;
      r.f32(v);
      index.matrix(i, j) = v;
    }
    const double norm = index.matrix.row(i).norm();
    if (!(std::abs(norm - 1.0) <= 1e-4)) {
      throw Error(ErrorCode::InvalidArgument, "index row " + std::to_string(i) + " is not unit length");
    }
    index.matrix.row(i) /= norm;
  }
  index.ids.resize(n);
  for (auto& id : index.ids) {
    if (!r.str(id)) throw truncated();
  }
  return index;
}

void save_index(const retrieval::EmbeddingIndex& index, const std::string& path) {
  write_file(path, encode_index(index));
}

retrieval::EmbeddingIndex load_index(const std::string& path,
                                     const std::optional<std::string>& expected_provider) {
  return decode_index(read_file(path), expected_provider);
}

}  // namespace hairforge::assets
