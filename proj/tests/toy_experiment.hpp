#pragma once

// In-memory train/dev runs over synthetic corpora.

#include <vector>

#include "esgclf/eval.hpp"
#include "esgclf/strategies.hpp"
#include "esgclf/toydata.hpp"

namespace toyexp {

using namespace esgclf;

struct ToyRun {
  LabelCatalog catalog;
  std::vector<Article> corpus;
  SplitSpec split;
  std::vector<Article> train;
  std::vector<Article> dev;
  toy::ToyStores stores;

  Stores view() const { return {&stores.article, &stores.label, &stores.token}; }
};

inline ToyRun make_run(std::size_t labels, const toy::CorpusSpec& spec, std::size_t dim, std::uint64_t embed_seed,
                       std::uint64_t split_seed, double fraction = 0.7) {
  auto catalog = toy::make_catalog(labels);
  auto corpus = toy::make_corpus(spec, catalog);
  auto stores = toy::embed_all(corpus, catalog, dim, embed_seed);
  auto split = stratified_split(corpus, fraction, split_seed);
  auto train = select_articles(corpus, split.train_ids);
  auto dev = select_articles(corpus, split.dev_ids);
  return {std::move(catalog), std::move(corpus), std::move(split), std::move(train), std::move(dev), std::move(stores)};
}

inline std::vector<Prediction> predict_all(const TrainedModel& m, const std::vector<Article>& articles,
                                           const Stores& stores, const LabelCatalog& catalog, std::size_t k) {
  std::vector<Prediction> out;
  for (const auto& a : articles) out.push_back(predict(m, a, stores, catalog, k));
  return out;
}

inline MetricsReport score(const std::vector<Prediction>& preds, const std::vector<Article>& gold,
                           const LabelCatalog& catalog) {
  return evaluate(preds, gold_map(gold), catalog);
}

}  // namespace toyexp
