#pragma once

// The four classification strategies, their training pipelines, and top-k
// prediction.
//
//   svm-ee   one-vs-rest SVM probabilities fused with article/definition cosine
//   ffn      feed-forward head over article vectors
//   ffn-ee   feed-forward head over [article | definition cosines]
//   cnn-svm  text CNN trained with softmax, then one-vs-rest SVM on its pooled features

#include <algorithm>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "esgclf/corpus.hpp"
#include "esgclf/embedding.hpp"
#include "esgclf/error.hpp"
#include "esgclf/neural.hpp"
#include "esgclf/svm.hpp"

namespace esgclf {

enum class StrategyKind { SvmEe, Ffn, FfnEe, CnnSvm };

inline std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::SvmEe: return "svm-ee";
    case StrategyKind::Ffn: return "ffn";
    case StrategyKind::FfnEe: return "ffn-ee";
    case StrategyKind::CnnSvm: return "cnn-svm";
  }
  return "?";
}

inline StrategyKind strategy_from_string(const std::string& s) {
  if (s == "svm-ee") return StrategyKind::SvmEe;
  if (s == "ffn") return StrategyKind::Ffn;
  if (s == "ffn-ee") return StrategyKind::FfnEe;
  if (s == "cnn-svm") return StrategyKind::CnnSvm;
  throw InputError("unknown strategy '" + s + "' (expected svm-ee, ffn, ffn-ee or cnn-svm)");
}

struct FusionConfig {
  double alpha = 0.7;  // weight on the SVM probability

  bool operator==(const FusionConfig&) const = default;
};

struct StrategyConfig {
  FusionConfig fusion;
  OvrParams svm;
  TrainConfig neural;
  FusionInputMode fusion_input = FusionInputMode::similarities;
};

struct Stores {
  const EmbeddingStore* article = nullptr;
  const EmbeddingStore* label = nullptr;
  const EmbeddingStore* token = nullptr;
};

struct SvmEeModel {
  OneVsRestSvm svm;
  FusionConfig fusion;
};

struct FfnModel {
  FfnHeadModel net;
  std::vector<LabelId> trained_labels;
};

struct FfnEeModel {
  FfnEeFusionModel net;
  std::vector<LabelId> trained_labels;
};

struct CnnSvmModel {
  CnnHeadModel cnn;
  OneVsRestSvm svm;
};

struct TrainedModel {
  std::vector<LabelId> catalog;  // label ids in catalog order, checked at prediction
  std::variant<SvmEeModel, FfnModel, FfnEeModel, CnnSvmModel> model;

  StrategyKind kind() const { return static_cast<StrategyKind>(model.index()); }
};

struct TrainingLog {
  std::vector<double> loss_curve;  // neural strategies
  OvrReport svm_report;            // svm-backed strategies
  std::vector<LabelId> absent_labels;  // catalog labels never seen in training
};

struct Prediction {
  std::string article_id;
  std::vector<std::pair<LabelId, double>> ranked;  // every catalog label, best first
  std::vector<LabelId> emitted;                    // first k of ranked
  StrategyKind strategy = StrategyKind::SvmEe;
  std::size_t k = 1;
};

namespace detail {

inline void require_store(const EmbeddingStore* s, StoreKind kind, const char* what) {
  if (!s) throw InputError(std::string("strategy needs a ") + what + " store");
  if (s->kind() != kind) throw InputError(std::string("expected a ") + what + " store, got " + to_string(s->kind()));
}

inline void require_ids(const EmbeddingStore& store, const std::vector<Article>& articles) {
  std::vector<std::string> missing;
  for (const auto& a : articles) {
    if (!store.contains(a.id)) missing.push_back(a.id);
  }
  if (missing.empty()) return;
  std::string msg = "missing " + to_string(store.kind()) + " embeddings for " + std::to_string(missing.size()) +
                    " article(s):";
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
  if (missing.size() > 20) msg += " ...";
  throw InputError(msg);
}

inline void require_label_vectors(const EmbeddingStore& store, const LabelCatalog& catalog) {
  std::vector<std::string> missing;
  for (const auto& e : catalog.entries()) {
    if (!store.contains(e.id)) missing.push_back(e.id);
  }
  if (missing.empty()) return;
  std::string msg = "missing label-definition embeddings for:";
  for (const auto& m : missing) msg += " " + m;
  throw InputError(msg);
}

inline std::vector<LabelId> present_primary_labels(const std::vector<Article>& train, const LabelCatalog& catalog) {
  std::vector<char> seen(catalog.size(), 0);
  for (const auto& a : train) seen[catalog.index_of(a.primary_label())] = 1;
  std::vector<LabelId> out;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (seen[i]) out.push_back(catalog[i].id);
  }
  return out;
}

inline std::vector<LabelId> absent_labels(const std::vector<LabelId>& trained, const LabelCatalog& catalog) {
  std::vector<LabelId> out;
  for (const auto& e : catalog.entries()) {
    if (std::find(trained.begin(), trained.end(), e.id) == trained.end()) out.push_back(e.id);
  }
  return out;
}

}  // namespace detail

/// Trains one strategy end to end. Neural heads learn each article's primary
/// (first) gold label; SVM stages use the full gold set.
inline TrainedModel train_strategy(StrategyKind kind, const std::vector<Article>& train, const Stores& stores,
                                   const LabelCatalog& catalog, StrategyConfig config, std::uint64_t seed,
                                   TrainingLog* log = nullptr) {
  if (train.empty()) throw InputError("train_strategy: no training articles");
  TrainingLog local;
  TrainingLog& lg = log ? *log : local;
  lg = {};
  config.svm.svm.seed = seed;
  config.neural.seed = seed;

  std::vector<std::vector<LabelId>> gold;
  std::vector<std::size_t> targets;
  for (const auto& a : train) {
    gold.push_back(a.gold_labels);
    targets.push_back(catalog.index_of(a.primary_label()));
  }

  TrainedModel out;
  out.catalog = catalog.ids();

  switch (kind) {
    case StrategyKind::SvmEe: {
      detail::require_store(stores.article, StoreKind::article, "article");
      detail::require_store(stores.label, StoreKind::label, "label");
      detail::require_ids(*stores.article, train);
      detail::require_label_vectors(*stores.label, catalog);
      std::vector<Vector> X;
      for (const auto& a : train) X.push_back(stores.article->vector(a.id));
      SvmEeModel m;
      m.svm = fit_one_vs_rest(X, gold, catalog, config.svm, &lg.svm_report);
      m.fusion = config.fusion;
      lg.absent_labels = detail::absent_labels(m.svm.labels, catalog);
      out.model = std::move(m);
      break;
    }
    case StrategyKind::Ffn: {
      detail::require_store(stores.article, StoreKind::article, "article");
      detail::require_ids(*stores.article, train);
      std::vector<Vector> X;
      for (const auto& a : train) X.push_back(stores.article->vector(a.id));
      FfnModel m;
      m.net = make_ffn(stores.article->dim(), catalog.size(), config.neural);
      lg.loss_curve = train_classifier(m.net, std::span<const Vector>(X), std::span<const std::size_t>(targets)).loss_curve;
      m.trained_labels = detail::present_primary_labels(train, catalog);
      lg.absent_labels = detail::absent_labels(m.trained_labels, catalog);
      out.model = std::move(m);
      break;
    }
    case StrategyKind::FfnEe: {
      detail::require_store(stores.article, StoreKind::article, "article");
      detail::require_store(stores.label, StoreKind::label, "label");
      detail::require_ids(*stores.article, train);
      detail::require_label_vectors(*stores.label, catalog);
      std::vector<Vector> X;
      for (const auto& a : train) {
        X.push_back(build_ee_fusion_input(stores.article->vector(a.id), *stores.label, catalog, config.fusion_input));
      }
      FfnEeModel m;
      m.net = make_ffn_ee(X.front().size(), catalog.size(), config.fusion_input, config.neural);
      lg.loss_curve = train_classifier(m.net, std::span<const Vector>(X), std::span<const std::size_t>(targets)).loss_curve;
      m.trained_labels = detail::present_primary_labels(train, catalog);
      lg.absent_labels = detail::absent_labels(m.trained_labels, catalog);
      out.model = std::move(m);
      break;
    }
    case StrategyKind::CnnSvm: {
      detail::require_store(stores.token, StoreKind::token, "token");
      detail::require_ids(*stores.token, train);
      std::vector<TokenMatrix> T;
      for (const auto& a : train) T.push_back(stores.token->tokens(a.id));
      CnnSvmModel m;
      m.cnn = make_cnn(stores.token->dim(), catalog.size(), config.neural);
      lg.loss_curve =
          train_classifier(m.cnn, std::span<const TokenMatrix>(T), std::span<const std::size_t>(targets)).loss_curve;
      // Second stage: SVM on eval-mode features of the trained network.
      std::vector<Vector> F;
      for (const auto& t : T) F.push_back(extract_cnn_representation(m.cnn, t));
      m.svm = fit_one_vs_rest(F, gold, catalog, config.svm, &lg.svm_report);
      lg.absent_labels = detail::absent_labels(m.svm.labels, catalog);
      out.model = std::move(m);
      break;
    }
  }
  return out;
}

/// fused(c) = alpha * p_svm(c) + (1 - alpha) * (1 + cos(article, def_c)) / 2,
/// over catalog labels; labels without a trained machine score 0.
inline LabelScores score_svm_ee(const SvmEeModel& model, std::span<const double> article_vec,
                                const EmbeddingStore& label_store, const LabelCatalog& catalog) {
  const double alpha = model.fusion.alpha;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("svm-ee: alpha must lie in [0, 1]");
  LabelScores p = predict_proba(model.svm, article_vec, catalog);
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    if (!model.svm.machines.contains(p.labels[i])) continue;
    if (!label_store.contains(p.labels[i])) {
      throw InputError("svm-ee: missing label-definition embedding for '" + p.labels[i] + "'");
    }
    const double sim = cosine_similarity(article_vec, label_store.vector(p.labels[i]));
    p.values[i] = alpha * p.values[i] + (1.0 - alpha) * (1.0 + sim) / 2.0;
  }
  return p;
}

/// Sorts labels by (trained first, score descending, catalog order) and emits the first k.
inline Prediction rank_and_emit(std::string article_id, const LabelScores& scores,
                                const std::vector<LabelId>& trained, StrategyKind kind, std::size_t k) {
  if (k < 1 || k > scores.labels.size()) {
    throw InputError("k must lie in [1, " + std::to_string(scores.labels.size()) + "]");
  }
  const std::set<LabelId> trained_set(trained.begin(), trained.end());
  std::vector<std::size_t> idx(scores.labels.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<char> live(idx.size());
  std::vector<double> value(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    live[i] = trained_set.contains(scores.labels[i]);
    value[i] = live[i] ? scores.values[i] : 0.0;
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (live[a] != live[b]) return live[a] > live[b];
    return value[a] > value[b];
  });
  Prediction p;
  p.article_id = std::move(article_id);
  p.strategy = kind;
  p.k = k;
  for (std::size_t i : idx) p.ranked.emplace_back(scores.labels[i], value[i]);
  for (std::size_t i = 0; i < k; ++i) p.emitted.push_back(p.ranked[i].first);
  return p;
}

/// Native per-label scores for one article, in catalog order.
inline LabelScores score_article(const TrainedModel& tm, const std::string& article_id, const Stores& stores,
                                 const LabelCatalog& catalog) {
  if (tm.catalog != catalog.ids()) throw InputError("model was trained against a different label catalog");
  return std::visit(
      [&](const auto& m) -> LabelScores {
        using M = std::decay_t<decltype(m)>;
        LabelScores s;
        if constexpr (std::is_same_v<M, SvmEeModel>) {
          detail::require_store(stores.article, StoreKind::article, "article");
          detail::require_store(stores.label, StoreKind::label, "label");
          s = score_svm_ee(m, stores.article->vector(article_id), *stores.label, catalog);
        } else if constexpr (std::is_same_v<M, FfnModel>) {
          detail::require_store(stores.article, StoreKind::article, "article");
          const auto r = forward(m.net, stores.article->vector(article_id));
          s.labels = catalog.ids();
          s.values = softmax(r.logits);
        } else if constexpr (std::is_same_v<M, FfnEeModel>) {
          detail::require_store(stores.article, StoreKind::article, "article");
          detail::require_store(stores.label, StoreKind::label, "label");
          const auto x = build_ee_fusion_input(stores.article->vector(article_id), *stores.label, catalog, m.net.fusion);
          const auto r = forward(m.net, x);
          s.labels = catalog.ids();
          s.values = softmax(r.logits);
        } else {
          detail::require_store(stores.token, StoreKind::token, "token");
          const auto feat = extract_cnn_representation(m.cnn, stores.token->tokens(article_id));
          s = predict_proba(m.svm, feat, catalog);
        }
        return s;
      },
      tm.model);
}

inline std::vector<LabelId> trained_labels(const TrainedModel& tm) {
  return std::visit(
      [](const auto& m) -> std::vector<LabelId> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SvmEeModel> || std::is_same_v<M, CnnSvmModel>) return m.svm.labels;
        else return m.trained_labels;
      },
      tm.model);
}

inline Prediction predict(const TrainedModel& tm, const Article& article, const Stores& stores,
                          const LabelCatalog& catalog, std::size_t k) {
  return rank_and_emit(article.id, score_article(tm, article.id, stores, catalog), trained_labels(tm), tm.kind(), k);
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string prediction_line(const Prediction& p) {
  nlohmann::ordered_json j;
  j["id"] = p.article_id;
  j["strategy"] = to_string(p.strategy);
  j["k"] = p.k;
  j["emitted"] = p.emitted;
  auto ranked = nlohmann::ordered_json::array();
  for (const auto& [label, score] : p.ranked) {
    nlohmann::ordered_json e;
    e["label"] = label;
    e["score"] = score;
    ranked.push_back(std::move(e));
  }
  j["ranked"] = std::move(ranked);
  return j.dump();
}

inline Prediction prediction_from_json(const json& j) {
  Prediction p;
  try {
    p.article_id = j.at("id").get<std::string>();
    p.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    p.k = j.at("k").get<std::size_t>();
    p.emitted = j.at("emitted").get<std::vector<LabelId>>();
    for (const auto& e : j.at("ranked")) p.ranked.emplace_back(e.at("label").get<LabelId>(), e.at("score").get<double>());
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed prediction record: ") + e.what());
  }
  return p;
}

inline std::vector<Prediction> parse_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(prediction_from_json(json::parse(text)));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    } catch (const ParseError&) {
      throw;
    } catch (const InputError& e) {
      throw ParseError(e.what(), line);
    }
  }
  return out;
}

inline json trained_model_to_json(const TrainedModel& tm) {
  json j;
  j["strategy"] = to_string(tm.kind());
  j["catalog"] = tm.catalog;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SvmEeModel>) {
          j["svm"] = ovr_to_json(m.svm);
          j["fusion"] = {{"alpha", m.fusion.alpha}, {"similarity_map", "affine"}};
        } else if constexpr (std::is_same_v<M, FfnModel>) {
          j["net"] = to_json(m.net);
          j["trained_labels"] = m.trained_labels;
        } else if constexpr (std::is_same_v<M, FfnEeModel>) {
          j["net"] = to_json(m.net);
          j["trained_labels"] = m.trained_labels;
        } else {
          j["cnn"] = to_json(m.cnn);
          j["svm"] = ovr_to_json(m.svm);
        }
      },
      tm.model);
  return j;
}

inline TrainedModel trained_model_from_json(const json& j) {
  TrainedModel tm;
  try {
    tm.catalog = j.at("catalog").get<std::vector<LabelId>>();
    switch (strategy_from_string(j.at("strategy").get<std::string>())) {
      case StrategyKind::SvmEe:
        tm.model = SvmEeModel{ovr_from_json(j.at("svm")), FusionConfig{j.at("fusion").at("alpha").get<double>()}};
        break;
      case StrategyKind::Ffn:
        tm.model = FfnModel{ffn_from_json(j.at("net")), j.at("trained_labels").get<std::vector<LabelId>>()};
        break;
      case StrategyKind::FfnEe:
        tm.model = FfnEeModel{ffn_ee_from_json(j.at("net")), j.at("trained_labels").get<std::vector<LabelId>>()};
        break;
      case StrategyKind::CnnSvm:
        tm.model = CnnSvmModel{cnn_from_json(j.at("cnn")), ovr_from_json(j.at("svm"))};
        break;
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
  return tm;
}

}  // namespace esgclf
