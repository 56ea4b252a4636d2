#pragma once

// The embedding boundary: vectors, token matrices, file-backed stores of
// precomputed embeddings, cosine geometry, and a feature-hashing toy
// embedder used in place of a pretrained encoder.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "esgclf/error.hpp"
#include "esgclf/rng.hpp"

namespace esgclf {

using Vector = std::vector<double>;

inline constexpr std::size_t kDefaultMaxSequenceLength = 256;

struct TokenMatrix {
  std::vector<Vector> rows;  // rows[length..] are zero padding
  std::size_t length = 0;

  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }

  friend bool operator==(const TokenMatrix& a, const TokenMatrix& b) {
    if (a.length != b.length || a.dim() != b.dim()) return false;
    return std::equal(a.rows.begin(), a.rows.begin() + static_cast<std::ptrdiff_t>(a.length),
                      b.rows.begin());
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// (a . b) / (|a| |b|), clamped to [-1, 1].
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw InputError("cosine_similarity: zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  return 1.0 - cosine_similarity(a, b);
}

// ---------------------------------------------------------------------------
// Stores

enum class StoreKind { article, label, token };

inline std::string to_string(StoreKind k) {
  switch (k) {
    case StoreKind::article: return "article";
    case StoreKind::label: return "label";
    case StoreKind::token: return "token";
  }
  return "?";
}

inline StoreKind store_kind_from_string(const std::string& s) {
  if (s == "article") return StoreKind::article;
  if (s == "label") return StoreKind::label;
  if (s == "token") return StoreKind::token;
  throw InputError("unknown store kind '" + s + "'");
}

/// Immutable-after-load map from id to a vector (article/label kinds) or a
/// token matrix (token kind). Insertion order is kept for serialization.
class EmbeddingStore {
 public:
  EmbeddingStore(std::size_t dim, StoreKind kind) : dim_(dim), kind_(kind) {
    if (dim == 0) throw InputError("embedding store dimension must be positive");
  }

  std::size_t dim() const noexcept { return dim_; }
  StoreKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return order_.size(); }
  const std::vector<std::string>& ids() const noexcept { return order_; }
  bool contains(const std::string& id) const {
    return vectors_.contains(id) || tokens_.contains(id);
  }

  void add(const std::string& id, Vector v) {
    if (kind_ == StoreKind::token) throw InputError("store: token store takes token matrices");
    check_vector(id, v);
    claim(id);
    vectors_.emplace(id, std::move(v));
  }

  void add(const std::string& id, TokenMatrix m) {
    if (kind_ != StoreKind::token) throw InputError("store: only token stores take token matrices");
    if (m.length == 0 || m.length > m.rows.size()) {
      throw InputError("store: entry '" + id + "' has an invalid token length");
    }
    for (std::size_t r = 0; r < m.length; ++r) check_vector(id, m.rows[r]);
    claim(id);
    tokens_.emplace(id, std::move(m));
  }

  const Vector& vector(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw InputError("store: no " + to_string(kind_) + " vector for '" + id + "'");
    return it->second;
  }

  const TokenMatrix& tokens(const std::string& id) const {
    auto it = tokens_.find(id);
    if (it == tokens_.end()) throw InputError("store: no token matrix for '" + id + "'");
    return it->second;
  }

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.kind_ == b.kind_ && a.order_ == b.order_ && a.vectors_ == b.vectors_ &&
           a.tokens_ == b.tokens_;
  }

 private:
  void check_vector(const std::string& id, const Vector& v) const {
    if (v.size() != dim_) {
      throw InputError("store: entry '" + id + "' has " + std::to_string(v.size()) +
                       " components, expected dim " + std::to_string(dim_));
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw InputError("store: entry '" + id + "' has a non-finite component");
    }
  }

  void claim(const std::string& id) {
    if (contains(id)) throw InputError("store: duplicate id '" + id + "'");
    order_.push_back(id);
  }

  std::size_t dim_;
  StoreKind kind_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Vector> vectors_;
  std::unordered_map<std::string, TokenMatrix> tokens_;
};

/// Writes the header line and one JSON record per entry. Doubles are printed
/// in shortest round-trip form, so a reload is bit-exact.
inline void save_store(const EmbeddingStore& store, std::ostream& out) {
  nlohmann::ordered_json header;
  header["dim"] = store.dim();
  header["kind"] = to_string(store.kind());
  header["count"] = store.size();
  out << header.dump() << '\n';
  for (const auto& id : store.ids()) {
    nlohmann::ordered_json rec;
    rec["id"] = id;
    if (store.kind() == StoreKind::token) {
      const auto& m = store.tokens(id);
      rec["tokens"] = std::vector<Vector>(m.rows.begin(), m.rows.begin() + static_cast<std::ptrdiff_t>(m.length));
    } else {
      rec["vector"] = store.vector(id);
    }
    out << rec.dump() << '\n';
  }
}

inline void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write store '" + path.string() + "'");
  save_store(store, out);
}

inline EmbeddingStore parse_store(std::istream& in) {
  std::string text;
  std::size_t line = 1;
  if (!std::getline(in, text)) throw ParseError("missing store header", line);
  nlohmann::json header;
  std::size_t dim = 0;
  std::size_t count = 0;
  StoreKind kind{};
  try {
    header = nlohmann::json::parse(text);
    dim = header.at("dim").get<std::size_t>();
    kind = store_kind_from_string(header.at("kind").get<std::string>());
    count = header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed store header: ") + e.what(), line);
  } catch (const InputError& e) {
    throw ParseError(e.what(), line);
  }
  EmbeddingStore store(dim, kind);
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(text);
      const auto id = rec.at("id").get<std::string>();
      if (kind == StoreKind::token) {
        TokenMatrix m;
        m.rows = rec.at("tokens").get<std::vector<Vector>>();
        m.length = m.rows.size();
        store.add(id, std::move(m));
      } else {
        store.add(id, rec.at("vector").get<Vector>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed store record: ") + e.what(), line);
    } catch (const InputError& e) {
      throw ParseError(e.what(), line);
    }
  }
  if (store.size() != count) {
    throw ParseError("header declares " + std::to_string(count) + " entries, found " + std::to_string(store.size()),
                     1);
  }
  return store;
}

inline EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read store '" + path.string() + "'");
  try {
    return parse_store(in);
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path.string());
  }
}

// ---------------------------------------------------------------------------
// Toy embedder (signed feature hashing)

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::uint64_t seeded_token_hash(std::string_view token, std::uint64_t seed) {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ splitmix64(seed);
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(h);
}

// A token's toy vector is +-1 in a single hashed bucket, so it is already unit norm.
inline Vector toy_token_vector(std::string_view token, std::size_t dim, std::uint64_t seed) {
  Vector v(dim, 0.0);
  const auto h = seeded_token_hash(token, seed);
  v[h % dim] = (h >> 63) ? -1.0 : 1.0;
  return v;
}

inline Vector toy_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw InputError("toy_embed: dim must be at least 2");
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw InputError("toy_embed: text has no tokens");
  Vector sum(dim, 0.0);
  for (const auto& t : tokens) {
    const auto h = seeded_token_hash(t, seed);
    sum[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  const double n = norm(sum);
  if (!(n > 0.0)) throw InputError("toy_embed: hashed tokens cancel to a zero vector");
  for (double& x : sum) x /= n;
  return sum;
}

inline TokenMatrix toy_embed_tokens(std::string_view text, std::size_t dim, std::uint64_t seed,
                                    std::size_t max_len = kDefaultMaxSequenceLength) {
  if (dim < 2) throw InputError("toy_embed_tokens: dim must be at least 2");
  if (max_len == 0) throw InputError("toy_embed_tokens: max_len must be positive");
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw InputError("toy_embed_tokens: text has no tokens");
  TokenMatrix m;
  m.length = std::min(tokens.size(), max_len);
  m.rows.assign(max_len, Vector(dim, 0.0));
  for (std::size_t i = 0; i < m.length; ++i) m.rows[i] = toy_token_vector(tokens[i], dim, seed);
  return m;
}

}  // namespace esgclf
