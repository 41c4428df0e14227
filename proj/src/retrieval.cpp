#include "hairforge/retrieval.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <set>

namespace hairforge::retrieval {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<Eigen::VectorXd> HashingProvider::embed_batch(const std::vector<std::string>& texts) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    const auto tokens = tokenize(text);
    if (!tokens.empty()) {
      const double w = 1.0 / std::sqrt(static_cast<double>(tokens.size()));
      for (const auto& t : tokens) {
        const std::uint64_t h = fnv1a(t);
        const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
        v(bucket) += (h >> 63) ? -w : w;
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

bool blank(const std::string& text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

Eigen::VectorXd normalized_or_throw(Eigen::VectorXd v, const std::string& what) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::EmptyText, "no embeddable tokens in " + what);
  }
  return v / n;
}

}  // namespace

TextEmbedding embed_text(const std::string& text, EmbeddingProvider& provider) {
  if (blank(text)) throw Error(ErrorCode::EmptyText, "text is empty");
  auto vecs = provider.embed_batch({text});
  if (vecs.size() != 1 || vecs.front().size() != provider.dim()) {
    throw Error(ErrorCode::MalformedResponse, "provider returned wrong embedding shape");
  }
  return {normalized_or_throw(std::move(vecs.front()), "'" + text + "'"), provider.id()};
}

EmbeddingIndex build_index(const std::vector<std::pair<std::string, std::string>>& captioned,
                           EmbeddingProvider& provider) {
  std::set<std::string> seen;
  for (const auto& [id, caption] : captioned) {
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, "duplicate id '" + id + "'");
  }
  EmbeddingIndex index;
  index.provider_id = provider.id();
  index.matrix.resize(static_cast<Eigen::Index>(captioned.size()), provider.dim());
  for (std::size_t i = 0; i < captioned.size(); ++i) {
    const auto& [id, caption] = captioned[i];
    try {
      index.matrix.row(static_cast<Eigen::Index>(i)) = embed_text(caption, provider).vector.transpose();
    } catch (const Error& e) {
      throw Error(e.code(), "caption of '" + id + "': " + e.what());
    }
    index.ids.push_back(id);
  }
  return index;
}

SimilarityResult retrieve_top_k(const EmbeddingIndex& index, const TextEmbedding& query, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (query.provider_id != index.provider_id) {
    throw Error(ErrorCode::ProviderMismatch,
                "query from '" + query.provider_id + "' against index from '" + index.provider_id + "'");
  }
  if (query.dim() != index.dim() && index.size() > 0) {
    throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.dim()) +
                                                  " != index dimension " + std::to_string(index.dim()));
  }
  SimilarityResult result;
  if (index.size() == 0) return result;
  const Eigen::VectorXd scores = index.matrix * query.vector;
  for (int i : top_k_order(scores, index.ids, k)) {
    result.entries.push_back({index.ids[static_cast<std::size_t>(i)], scores(i)});
  }
  return result;
}

namespace {

bool has_any(const std::vector<std::string>& tokens, std::initializer_list<const char*> words) {
  for (const auto& t : tokens) {
    for (const char* w : words) {
      if (t == w) return true;
    }
  }
  return false;
}

}  // namespace

Intent route_intent(const std::string& text) {
  Intent intent;
  intent.raw = text;
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    intent.kind = Intent::Kind::unknown;
    return intent;
  }
  if (has_any(tokens, {"wind", "breeze", "gust", "windy", "breezy", "gusty"})) {
    intent.kind = Intent::Kind::wind;
    intent.on = !has_any(tokens, {"stop", "off", "no", "disable", "calm", "without"});
    for (const auto& t : tokens) {
      if (std::isdigit(static_cast<unsigned char>(t.front()))) {
        try {
          const double v = std::stod(t);
          if (std::isfinite(v)) intent.strength = v;
        } catch (const std::exception&) {
        }
        break;
      }
    }
    return intent;
  }
  const bool mentions_sim = has_any(tokens, {"sim", "simulation", "simulate", "physics"});
  if (mentions_sim && has_any(tokens, {"stop", "freeze", "pause"})) {
    intent.kind = Intent::Kind::simulate;
    intent.on = false;
    return intent;
  }
  if (mentions_sim && has_any(tokens, {"start", "run", "resume", "play"})) {
    intent.kind = Intent::Kind::simulate;
    intent.on = true;
    return intent;
  }
  if (has_any(tokens, {"render", "photo", "picture"})) {
    intent.kind = Intent::Kind::render;
    intent.attributes.misc = text;
    return intent;
  }
  intent.kind = Intent::Kind::retrieve;
  intent.query = text;
  return intent;
}

std::string_view to_string(Intent::Kind kind) {
  switch (kind) {
    case Intent::Kind::retrieve: return "retrieve";
    case Intent::Kind::wind: return "wind";
    case Intent::Kind::simulate: return "simulate";
    case Intent::Kind::render: return "render";
    case Intent::Kind::unknown: return "unknown";
  }
  return "unknown";
}

}  // namespace hairforge::retrieval
