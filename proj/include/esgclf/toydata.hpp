#pragma once

// Synthetic corpora with cluster structure, and toy-embedded stores for
// them. Each label owns a small keyword vocabulary; an article mixes
// keywords of its gold labels with language-specific filler words, so
// toy-embedded articles cluster by label.

#include <cstdint>
#include <string>
#include <vector>

#include "esgclf/corpus.hpp"
#include "esgclf/embedding.hpp"
#include "esgclf/rng.hpp"

namespace esgclf::toy {

struct CorpusSpec {
  std::string language = "en";
  std::vector<std::size_t> supports;  // articles per primary label (label i of the catalog)
  std::size_t min_tokens = 16;
  std::size_t max_tokens = 28;
  double keyword_rate = 0.4;       // fraction of tokens drawn from gold-label keywords
  double multi_label_rate = 0.0;   // fraction of articles with 2-3 gold labels
  std::size_t filler_vocab = 80;
  // Labels are grouped into families of `family_size` consecutive catalog
  // entries. A keyword token comes from the family's shared vocabulary with
  // probability `family_share`, and extra gold labels of a multi-label
  // article are drawn from the primary label's family.
  std::size_t family_size = 1;
  double family_share = 0.0;
  std::uint64_t seed = 1;
};

inline std::string keyword(std::size_t label, std::size_t j) {
  return "topic" + std::to_string(label) + "term" + std::to_string(j);
}

inline std::string family_keyword(std::size_t family, std::size_t j) {
  return "family" + std::to_string(family) + "term" + std::to_string(j);
}

inline constexpr std::size_t kKeywordsPerLabel = 8;

/// Catalog of `n` labels "issue-0".."issue-(n-1)" whose definitions list their keywords.
inline LabelCatalog make_catalog(std::size_t n) {
  std::vector<LabelEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    std::string def = "Articles about";
    for (std::size_t j = 0; j < kKeywordsPerLabel; ++j) def += " " + keyword(i, j);
    entries.push_back({"issue-" + std::to_string(i), "Issue " + std::to_string(i), def});
  }
  return LabelCatalog(std::move(entries));
}

inline std::vector<Article> make_corpus(const CorpusSpec& spec, const LabelCatalog& catalog) {
  Rng rng(spec.seed);
  std::vector<Article> out;
  std::size_t serial = 0;
  // Interleave labels so that corpus order is not sorted by label.
  std::vector<std::size_t> remaining = spec.supports;
  std::vector<std::size_t> order;
  for (bool any = true; any;) {
    any = false;
    for (std::size_t l = 0; l < remaining.size(); ++l) {
      if (remaining[l] > 0) {
        order.push_back(l);
        --remaining[l];
        any = true;
      }
    }
  }
  for (std::size_t primary : order) {
    Article a;
    a.id = spec.language + "-" + std::to_string(serial++);
    a.language = LanguageTag(spec.language);
    a.gold_labels.push_back(catalog[primary].id);
    std::vector<std::size_t> labels{primary};
    const std::size_t fam = std::max<std::size_t>(1, spec.family_size);
    const std::size_t fam_begin = primary / fam * fam;
    const std::size_t fam_end = std::min(catalog.size(), fam_begin + fam);
    const bool within_family = fam_end - fam_begin > 1;
    const std::size_t pool = within_family ? fam_end - fam_begin : catalog.size();
    if (pool > 1 && rng.bernoulli(spec.multi_label_rate)) {
      const std::size_t extra = 1 + rng.below(std::min<std::size_t>(2, pool - 1));
      while (labels.size() < 1 + extra) {
        const auto l = within_family ? fam_begin + static_cast<std::size_t>(rng.below(pool))
                                     : static_cast<std::size_t>(rng.below(catalog.size()));
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) {
          labels.push_back(l);
          a.gold_labels.push_back(catalog[l].id);
        }
      }
    }
    const std::size_t n_tokens = spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
    std::string body;
    for (std::size_t t = 0; t < n_tokens; ++t) {
      std::string word;
      if (rng.bernoulli(spec.keyword_rate)) {
        const std::size_t l = labels[rng.below(labels.size())];
        if (rng.bernoulli(spec.family_share)) {
          word = family_keyword(l / fam, rng.below(kKeywordsPerLabel));
        } else {
          word = keyword(l, rng.below(kKeywordsPerLabel));
        }
      } else {
        word = spec.language + "filler" + std::to_string(rng.below(spec.filler_vocab));
      }
      if (!body.empty()) body += ' ';
      body += word;
    }
    a.body = std::move(body);
    out.push_back(std::move(a));
  }
  return out;
}

struct ToyStores {
  EmbeddingStore article;
  EmbeddingStore label;
  EmbeddingStore token;
};

inline ToyStores embed_all(const std::vector<Article>& articles, const LabelCatalog& catalog, std::size_t dim,
                           std::uint64_t seed, std::size_t max_len = 64) {
  ToyStores s{EmbeddingStore(dim, StoreKind::article), EmbeddingStore(dim, StoreKind::label),
              EmbeddingStore(dim, StoreKind::token)};
  for (const auto& a : articles) {
    const std::string text = embedding_text(a);
    s.article.add(a.id, toy_embed(text, dim, seed));
    s.token.add(a.id, toy_embed_tokens(text, dim, seed, max_len));
  }
  for (const auto& e : catalog.entries()) s.label.add(e.id, toy_embed(e.definition, dim, seed));
  return s;
}

}  // namespace esgclf::toy
