#pragma once

// Articles, the label catalog, stratified train/dev splits and
// mono/multilingual training composition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "esgclf/error.hpp"
#include "esgclf/rng.hpp"

namespace esgclf {

using json = nlohmann::json;
using LabelId = std::string;

class LanguageTag {
 public:
  enum class Known { en, fr, zh, other };

  explicit LanguageTag(std::string code) : code_(std::move(code)) {
    if (code_.empty()) throw InputError("language tag is empty");
    for (char c : code_) {
      if (!((c >= 'a' && c <= 'z') || c == '-')) {
        throw InputError("language tag '" + code_ + "' is not lowercase ISO-639-1 text");
      }
    }
  }

  static LanguageTag en() { return LanguageTag("en"); }
  static LanguageTag fr() { return LanguageTag("fr"); }
  static LanguageTag zh() { return LanguageTag("zh"); }

  const std::string& code() const noexcept { return code_; }

  Known known() const noexcept {
    if (code_ == "en") return Known::en;
    if (code_ == "fr") return Known::fr;
    if (code_ == "zh") return Known::zh;
    return Known::other;
  }

  auto operator<=>(const LanguageTag&) const = default;

 private:
  std::string code_;
};

struct Article {
  std::string id;
  LanguageTag language{"en"};
  std::optional<std::string> title;
  std::string body;
  std::vector<LabelId> gold_labels;  // ordered, no duplicates; first is the primary label

  const LabelId& primary_label() const { return gold_labels.front(); }

  bool operator==(const Article&) const = default;
};

// Text handed to an embedder: the title (if any) and the body joined by a newline.
inline std::string embedding_text(const Article& a) {
  if (a.title && !a.title->empty()) return *a.title + "\n" + a.body;
  return a.body;
}

struct LabelEntry {
  LabelId id;
  std::string name;
  std::string definition;

  bool operator==(const LabelEntry&) const = default;
};

class LabelCatalog {
 public:
  static constexpr std::size_t kDefaultSize = 35;

  LabelCatalog() = default;

  explicit LabelCatalog(std::vector<LabelEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.id.empty()) throw InputError("label catalog: empty label id");
      if (e.definition.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw InputError("label catalog: label '" + e.id + "' has an empty definition");
      }
      if (!index_.emplace(e.id, i).second) {
        throw InputError("label catalog: duplicate label id '" + e.id + "'");
      }
    }
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<LabelEntry>& entries() const noexcept { return entries_; }
  const LabelEntry& operator[](std::size_t i) const { return entries_.at(i); }

  bool contains(const LabelId& id) const { return index_.contains(id); }

  std::size_t index_of(const LabelId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InputError("unknown label id '" + id + "'");
    return it->second;
  }

  std::vector<LabelId> ids() const {
    std::vector<LabelId> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.id);
    return out;
  }

 private:
  std::vector<LabelEntry> entries_;
  std::unordered_map<LabelId, std::size_t> index_;
};

inline LabelCatalog catalog_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("labels") || !doc["labels"].is_array()) {
    throw InputError("label catalog: expected an object with a \"labels\" array");
  }
  std::vector<LabelEntry> entries;
  for (const auto& item : doc["labels"]) {
    try {
      entries.push_back({item.at("id").get<std::string>(), item.at("name").get<std::string>(),
                         item.at("definition").get<std::string>()});
    } catch (const json::exception& e) {
      throw InputError(std::string("label catalog: malformed entry: ") + e.what());
    }
  }
  return LabelCatalog(std::move(entries));
}

inline json catalog_to_json(const LabelCatalog& catalog) {
  json labels = json::array();
  for (const auto& e : catalog.entries()) {
    labels.push_back({{"id", e.id}, {"name", e.name}, {"definition", e.definition}});
  }
  return {{"labels", std::move(labels)}};
}

inline LabelCatalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read label catalog '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("label catalog '" + path.string() + "': " + e.what());
  }
  return catalog_from_json(doc);
}

inline void save_catalog(const LabelCatalog& catalog, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write label catalog '" + path.string() + "'");
  out << catalog_to_json(catalog).dump(2) << '\n';
}

namespace detail {

inline bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

inline Article article_from_record(const json& rec, const LabelCatalog& catalog, std::size_t line) {
  if (!rec.is_object()) throw ParseError("record is not a JSON object", line);
  Article a;
  try {
    a.id = rec.at("id").get<std::string>();
    a.language = LanguageTag(rec.at("language").get<std::string>());
    if (rec.contains("title") && !rec["title"].is_null()) a.title = rec["title"].get<std::string>();
    a.body = rec.at("body").get<std::string>();
    for (const auto& l : rec.at("labels")) a.gold_labels.push_back(l.get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), line);
  } catch (const InputError& e) {
    throw ParseError(e.what(), line);
  }
  if (a.id.empty()) throw ParseError("empty article id", line);
  if (blank(a.body)) throw ParseError("article '" + a.id + "' has an empty body", line);
  if (a.gold_labels.empty()) throw ParseError("article '" + a.id + "' has no labels", line);
  std::unordered_set<LabelId> seen;
  for (const auto& l : a.gold_labels) {
    if (!catalog.contains(l)) {
      throw ParseError("article '" + a.id + "': unknown label id '" + l + "'", line);
    }
    if (!seen.insert(l).second) {
      throw ParseError("article '" + a.id + "': duplicate label '" + l + "'", line);
    }
  }
  return a;
}

}  // namespace detail

inline json article_to_json(const Article& a) {
  json rec;
  rec["id"] = a.id;
  rec["language"] = a.language.code();
  rec["title"] = a.title ? json(*a.title) : json(nullptr);
  rec["body"] = a.body;
  rec["labels"] = a.gold_labels;
  return rec;
}

/// Parses a JSONL corpus, validating every record against `catalog`.
/// Blank lines are skipped; article order follows the file.
inline std::vector<Article> parse_corpus(std::istream& in, const LabelCatalog& catalog) {
  std::vector<Article> out;
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::blank(text)) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    Article a = detail::article_from_record(rec, catalog, line);
    if (!ids.insert(a.id).second) throw ParseError("duplicate article id '" + a.id + "'", line);
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<Article> load_corpus(const std::filesystem::path& path, const LabelCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read corpus '" + path.string() + "'");
  try {
    return parse_corpus(in, catalog);
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path.string());
  }
}

inline void write_corpus(const std::vector<Article>& articles, std::ostream& out) {
  for (const auto& a : articles) out << article_to_json(a).dump() << '\n';
}

inline void write_corpus(const std::vector<Article>& articles, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write corpus '" + path.string() + "'");
  write_corpus(articles, out);
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  std::vector<std::string> train_ids;  // corpus order
  std::vector<std::string> dev_ids;    // corpus order
  std::uint64_t seed = 0;
  double train_fraction = 0.7;

  bool operator==(const SplitSpec&) const = default;
};

inline json split_to_json(const SplitSpec& s) {
  json doc;
  doc["seed"] = s.seed;
  doc["train_fraction"] = s.train_fraction;
  doc["train_ids"] = s.train_ids;
  doc["dev_ids"] = s.dev_ids;
  return doc;
}

inline SplitSpec split_from_json(const json& doc) {
  SplitSpec s;
  try {
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.train_fraction = doc.at("train_fraction").get<double>();
    s.train_ids = doc.at("train_ids").get<std::vector<std::string>>();
    s.dev_ids = doc.at("dev_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed split file: ") + e.what());
  }
  return s;
}

/// Number of training articles drawn from a stratum of `support` articles.
/// Singletons go to train; larger strata keep at least one article on each side.
inline std::size_t stratum_train_count(std::size_t support, double train_fraction) {
  if (support <= 1) return support;
  const auto n = static_cast<long long>(std::llround(train_fraction * static_cast<double>(support)));
  return static_cast<std::size_t>(std::clamp<long long>(n, 1, static_cast<long long>(support) - 1));
}

/// Deterministic split stratified on each article's primary (first) gold label.
///
/// Strata are visited in lexicographic label order; each stratum's articles
/// (in corpus order) are shuffled with one shared xorshift64* stream seeded
/// by `seed`, and the first round(fraction * support) go to train. Output id
/// lists are in corpus order.
inline SplitSpec stratified_split(const std::vector<Article>& corpus, double train_fraction,
                                  std::uint64_t seed) {
  if (corpus.empty()) throw InputError("stratified_split: corpus is empty");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("stratified_split: train_fraction must lie in (0, 1)");
  }
  std::map<LabelId, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].gold_labels.empty()) {
      throw InputError("stratified_split: article '" + corpus[i].id + "' has no labels");
    }
    strata[corpus[i].primary_label()].push_back(i);
  }

  Rng rng(seed);
  std::vector<char> in_train(corpus.size(), 0);
  for (auto& [label, members] : strata) {
    rng.shuffle(std::span<std::size_t>(members));
    const std::size_t n_train = stratum_train_count(members.size(), train_fraction);
    for (std::size_t j = 0; j < n_train; ++j) in_train[members[j]] = 1;
  }

  SplitSpec s;
  s.seed = seed;
  s.train_fraction = train_fraction;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (in_train[i] ? s.train_ids : s.dev_ids).push_back(corpus[i].id);
  }
  return s;
}

/// Selects the articles whose ids appear in `ids`, keeping corpus order.
inline std::vector<Article> select_articles(const std::vector<Article>& corpus,
                                            const std::vector<std::string>& ids) {
  const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  std::vector<Article> out;
  for (const auto& a : corpus) {
    if (wanted.contains(a.id)) out.push_back(a);
  }
  if (out.size() != wanted.size()) throw InputError("split references ids absent from the corpus");
  return out;
}

// ---------------------------------------------------------------------------
// Training-set composition

struct Monolingual {
  LanguageTag target;
};

struct Multilingual {
  std::vector<LanguageTag> languages;
};

using Composition = std::variant<Monolingual, Multilingual>;

inline std::vector<LanguageTag> composition_languages(const Composition& c) {
  if (const auto* m = std::get_if<Monolingual>(&c)) return {m->target};
  return std::get<Multilingual>(c).languages;
}

inline std::vector<Article> compose_training_set(const std::map<LanguageTag, std::vector<Article>>& corpora,
                                                 const Composition& mode) {
  std::vector<Article> out;
  for (const auto& tag : composition_languages(mode)) {
    auto it = corpora.find(tag);
    if (it == corpora.end()) {
      throw InputError("compose_training_set: no corpus for language '" + tag.code() + "'");
    }
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

}  // namespace esgclf
