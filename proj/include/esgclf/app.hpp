#pragma once

// Experiment orchestration behind the command-line tool: run configuration,
// the split/train/predict/evaluate commands and the experiment manifest.
//
// Run directory layout: <out>/<name>/{split.json, model.json, train.log,
// predictions.jsonl, report.json, report.txt, report.csv, manifest.json}.
// Training languages other than the target get their own split.<lang>.json.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "esgclf/corpus.hpp"
#include "esgclf/embedding.hpp"
#include "esgclf/error.hpp"
#include "esgclf/eval.hpp"
#include "esgclf/strategies.hpp"

namespace esgclf::app {

namespace fs = std::filesystem;

struct RunConfig {
  std::string name = "run";
  fs::path catalog;
  std::map<std::string, fs::path> corpora;  // language code -> corpus file
  fs::path article_store;
  fs::path label_store;
  fs::path token_store;
  fs::path out = "runs";
  StrategyKind strategy = StrategyKind::SvmEe;
  std::string target = "en";
  std::vector<std::string> languages;  // training languages; empty means {target}
  std::size_t k = 1;
  double train_fraction = 0.7;
  std::uint64_t split_seed = 13;
  std::uint64_t train_seed = 7;
  bool include_dev = false;
  StrategyConfig strategy_config;
  MacroAverage macro = MacroAverage::observed;

  fs::path run_dir() const { return out / name; }

  std::vector<std::string> training_languages() const {
    return languages.empty() ? std::vector<std::string>{target} : languages;
  }

  Composition composition() const {
    const auto langs = training_languages();
    if (langs.size() == 1 && langs.front() == target) return Monolingual{LanguageTag(target)};
    std::vector<LanguageTag> tags;
    for (const auto& l : langs) tags.emplace_back(l);
    return Multilingual{tags};
  }
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

}  // namespace detail

/// Reads a JSON run config. Relative paths resolve against the config file's directory.
inline RunConfig config_from_json(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  try {
    c.name = doc.value("name", c.name);
    c.catalog = detail::resolve(base_dir, doc.value("catalog", std::string{}));
    if (doc.contains("corpora")) {
      for (const auto& [lang, path] : doc["corpora"].items()) {
        LanguageTag tag(lang);
        c.corpora[tag.code()] = detail::resolve(base_dir, path.get<std::string>());
      }
    }
    if (doc.contains("stores")) {
      const auto& s = doc["stores"];
      c.article_store = detail::resolve(base_dir, s.value("article", std::string{}));
      c.label_store = detail::resolve(base_dir, s.value("label", std::string{}));
      c.token_store = detail::resolve(base_dir, s.value("token", std::string{}));
    }
    if (doc.contains("out")) c.out = detail::resolve(base_dir, doc["out"].get<std::string>());
    else c.out = detail::resolve(base_dir, "runs");
    if (doc.contains("strategy")) c.strategy = strategy_from_string(doc["strategy"].get<std::string>());
    c.target = doc.value("target", c.target);
    c.languages = doc.value("languages", c.languages);
    c.k = doc.value("k", c.k);
    c.train_fraction = doc.value("train_fraction", c.train_fraction);
    if (doc.contains("seeds")) {
      c.split_seed = doc["seeds"].value("split", c.split_seed);
      c.train_seed = doc["seeds"].value("train", c.train_seed);
    }
    c.include_dev = doc.value("include_dev", c.include_dev);
    c.strategy_config.fusion.alpha = doc.value("alpha", c.strategy_config.fusion.alpha);
    if (doc.contains("svm")) {
      const auto& s = doc["svm"];
      auto& p = c.strategy_config.svm;
      p.svm.C = s.value("C", p.svm.C);
      p.svm.tol = s.value("tol", p.svm.tol);
      p.svm.max_iter = s.value("max_iter", p.svm.max_iter);
      p.calibration_folds = s.value("calibration_folds", p.calibration_folds);
    }
    if (doc.contains("neural")) c.strategy_config.neural = train_config_from_json(doc["neural"]);
    if (doc.contains("fusion_input")) {
      const auto f = doc["fusion_input"].get<std::string>();
      if (f == "similarities") c.strategy_config.fusion_input = FusionInputMode::similarities;
      else if (f == "concat-defs") c.strategy_config.fusion_input = FusionInputMode::concat_definitions;
      else throw InputError("config: fusion_input must be 'similarities' or 'concat-defs'");
    }
    if (doc.contains("macro")) {
      const auto m = doc["macro"].get<std::string>();
      if (m == "observed") c.macro = MacroAverage::observed;
      else if (m == "all-catalog") c.macro = MacroAverage::all_catalog;
      else throw InputError("config: macro must be 'observed' or 'all-catalog'");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed run config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(doc, fs::absolute(path).parent_path());
}

/// The resolved configuration, echoed into every JSON artifact.
inline json config_to_json(const RunConfig& c) {
  json corpora = json::object();
  for (const auto& [lang, p] : c.corpora) corpora[lang] = p.string();
  const auto& s = c.strategy_config;
  TrainConfig neural = s.neural;
  neural.seed = c.train_seed;  // the training seed drives every stage
  return {{"name", c.name},
          {"catalog", c.catalog.string()},
          {"corpora", corpora},
          {"stores", {{"article", c.article_store.string()}, {"label", c.label_store.string()}, {"token", c.token_store.string()}}},
          {"out", c.out.string()},
          {"strategy", to_string(c.strategy)},
          {"target", c.target},
          {"languages", c.training_languages()},
          {"k", c.k},
          {"train_fraction", c.train_fraction},
          {"seeds", {{"split", c.split_seed}, {"train", c.train_seed}}},
          {"include_dev", c.include_dev},
          {"alpha", s.fusion.alpha},
          {"svm", {{"C", s.svm.svm.C}, {"tol", s.svm.svm.tol}, {"max_iter", s.svm.svm.max_iter},
                   {"calibration_folds", s.svm.calibration_folds}}},
          {"neural", train_config_to_json(neural)},
          {"fusion_input", s.fusion_input == FusionInputMode::similarities ? "similarities" : "concat-defs"},
          {"macro", c.macro == MacroAverage::observed ? "observed" : "all-catalog"}};
}

inline void validate(const RunConfig& c) {
  if (c.k < 1) throw InputError("config: k must be at least 1");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw InputError("config: train_fraction must lie in (0, 1)");
  const auto& a = c.strategy_config.fusion.alpha;
  if (!(a >= 0.0 && a <= 1.0)) throw InputError("config: alpha must lie in [0, 1]");
  const double d = c.strategy_config.neural.dropout;
  if (!(d >= 0.0 && d < 1.0)) throw InputError("config: dropout must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Files

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << bytes;
  if (!out) throw Error("write to '" + p.string() + "' failed");
}

inline void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw InputError("config: no " + what + " path given");
  if (!fs::exists(p)) throw InputError(what + " not found: " + p.string());
}

/// Exclusive lock on a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) throw InputError("run directory is locked by another process: " + path_.string());
      throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    ::close(fd);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

struct LoadedStores {
  std::optional<EmbeddingStore> article;
  std::optional<EmbeddingStore> label;
  std::optional<EmbeddingStore> token;

  Stores view() const {
    return {article ? &*article : nullptr, label ? &*label : nullptr, token ? &*token : nullptr};
  }
};

inline LoadedStores load_stores_for(const RunConfig& c) {
  LoadedStores s;
  const bool needs_article = c.strategy != StrategyKind::CnnSvm;
  const bool needs_label = c.strategy == StrategyKind::SvmEe || c.strategy == StrategyKind::FfnEe;
  const bool needs_token = c.strategy == StrategyKind::CnnSvm;
  if (needs_article) {
    require_file(c.article_store, "article store");
    s.article = load_store(c.article_store);
  }
  if (needs_label) {
    require_file(c.label_store, "label store");
    s.label = load_store(c.label_store);
  }
  if (needs_token) {
    require_file(c.token_store, "token store");
    s.token = load_store(c.token_store);
  }
  return s;
}

inline LabelCatalog load_catalog_for(const RunConfig& c) {
  require_file(c.catalog, "label catalog");
  return load_catalog(c.catalog);
}

inline std::vector<Article> load_language(const RunConfig& c, const std::string& lang, const LabelCatalog& catalog) {
  auto it = c.corpora.find(lang);
  if (it == c.corpora.end()) throw InputError("config: no corpus for language '" + lang + "'");
  require_file(it->second, "corpus");
  return load_corpus(it->second, catalog);
}

inline fs::path split_path(const RunConfig& c, const std::string& lang) {
  return lang == c.target ? c.run_dir() / "split.json" : c.run_dir() / ("split." + lang + ".json");
}

inline void log_line(const std::string& msg) { std::cerr << "[esgclf] " << msg << '\n'; }

// ---------------------------------------------------------------------------
// Commands

/// Splits the target corpus (and every other training language) and writes the split files.
inline std::vector<fs::path> cmd_split(const RunConfig& c) {
  validate(c);
  const LabelCatalog catalog = load_catalog_for(c);
  std::vector<std::string> langs{c.target};
  for (const auto& l : c.training_languages()) {
    if (l != c.target) langs.push_back(l);
  }
  std::vector<fs::path> written;
  for (const auto& lang : langs) {
    const auto corpus = load_language(c, lang, catalog);
    const SplitSpec s = stratified_split(corpus, c.train_fraction, c.split_seed);
    const auto p = split_path(c, lang);
    write_file(p, split_to_json(s).dump(2) + "\n");
    log_line("split " + lang + ": " + std::to_string(s.train_ids.size()) + " train / " +
             std::to_string(s.dev_ids.size()) + " dev -> " + p.string());
    written.push_back(p);
  }
  return written;
}

inline SplitSpec read_split(const fs::path& p) {
  require_file(p, "split file");
  try {
    return split_from_json(json::parse(read_file(p)));
  } catch (const json::parse_error& e) {
    throw InputError("split file '" + p.string() + "': " + e.what());
  }
}

/// Trains the configured strategy on the composed training set; writes model.json and train.log.
inline std::vector<fs::path> cmd_train(const RunConfig& c) {
  validate(c);
  const LabelCatalog catalog = load_catalog_for(c);
  std::map<LanguageTag, std::vector<Article>> parts;
  for (const auto& lang : c.training_languages()) {
    const auto corpus = load_language(c, lang, catalog);
    const SplitSpec s = read_split(split_path(c, lang));
    std::vector<std::string> ids = s.train_ids;
    if (c.include_dev) ids.insert(ids.end(), s.dev_ids.begin(), s.dev_ids.end());
    parts[LanguageTag(lang)] = select_articles(corpus, ids);
  }
  const auto train = compose_training_set(parts, c.composition());
  const LoadedStores stores = load_stores_for(c);

  log_line("training " + to_string(c.strategy) + " on " + std::to_string(train.size()) + " articles");
  TrainingLog tl;
  const TrainedModel model = train_strategy(c.strategy, train, stores.view(), catalog, c.strategy_config,
                                            c.train_seed, &tl);

  json doc = trained_model_to_json(model);
  doc["config"] = config_to_json(c);
  doc["training_articles"] = train.size();
  const auto model_path = c.run_dir() / "model.json";
  write_file(model_path, doc.dump() + "\n");

  std::ostringstream log;
  log << "config " << config_to_json(c).dump() << '\n';
  log << "seeds split=" << c.split_seed << " train=" << c.train_seed << '\n';
  log << "training_articles " << train.size() << '\n';
  log << std::setprecision(17);
  for (std::size_t e = 0; e < tl.loss_curve.size(); ++e) log << "epoch " << (e + 1) << " loss " << tl.loss_curve[e] << '\n';
  for (const auto& l : tl.svm_report.trained) log << "svm trained " << l << '\n';
  for (const auto& l : tl.svm_report.skipped) log << "svm skipped " << l << '\n';
  for (const auto& l : tl.svm_report.platt_not_converged) log << "platt not converged " << l << '\n';
  for (const auto& l : tl.absent_labels) log << "absent from training " << l << '\n';
  const auto log_path = c.run_dir() / "train.log";
  write_file(log_path, log.str());
  log_line("model -> " + model_path.string());
  return {model_path, log_path};
}

inline TrainedModel read_model(const fs::path& p) {
  require_file(p, "model file");
  try {
    return trained_model_from_json(json::parse(read_file(p)));
  } catch (const json::parse_error& e) {
    throw InputError("model file '" + p.string() + "': " + e.what());
  }
}

/// Predicts `articles` (default: the target dev split) and writes predictions.jsonl.
inline fs::path cmd_predict(const RunConfig& c, const fs::path& model_path,
                            const std::optional<fs::path>& articles_path = std::nullopt,
                            const std::optional<fs::path>& output = std::nullopt) {
  validate(c);
  const LabelCatalog catalog = load_catalog_for(c);
  const TrainedModel model = read_model(model_path);
  std::vector<Article> articles;
  if (articles_path) {
    require_file(*articles_path, "article file");
    articles = load_corpus(*articles_path, catalog);
  } else {
    articles = select_articles(load_language(c, c.target, catalog), read_split(split_path(c, c.target)).dev_ids);
  }
  RunConfig rc = c;
  rc.strategy = model.kind();
  const LoadedStores stores = load_stores_for(rc);
  std::string out;
  for (const auto& a : articles) out += prediction_line(predict(model, a, stores.view(), catalog, c.k)) + "\n";
  const fs::path p = output ? *output : c.run_dir() / "predictions.jsonl";
  write_file(p, out);
  log_line(std::to_string(articles.size()) + " predictions (k=" + std::to_string(c.k) + ") -> " + p.string());
  return p;
}

inline std::vector<Prediction> read_predictions(const fs::path& p) {
  require_file(p, "predictions file");
  std::istringstream in(read_file(p));
  return parse_predictions(in);
}

struct EvaluationOutput {
  MetricsReport report;
  std::vector<fs::path> files;
};

/// Scores predictions against a gold corpus; writes report.json, report.txt and report.csv to `out_dir`.
inline EvaluationOutput cmd_evaluate(const fs::path& predictions_path, const fs::path& gold_path,
                                     const fs::path& catalog_path, const fs::path& out_dir,
                                     MacroAverage macro = MacroAverage::observed,
                                     const std::optional<json>& config_echo = std::nullopt,
                                     const std::string& run_name = "run") {
  require_file(catalog_path, "label catalog");
  const LabelCatalog catalog = load_catalog(catalog_path);
  const auto preds = read_predictions(predictions_path);
  require_file(gold_path, "gold corpus");
  const auto gold = load_corpus(gold_path, catalog);
  EvaluationOutput out;
  out.report = evaluate(preds, gold_map(gold), catalog, macro);
  json doc = report_to_json(out.report);
  if (config_echo) doc["config"] = *config_echo;
  const std::vector<RunRow> rows{{run_name, out.report}};
  out.files = {out_dir / "report.json", out_dir / "report.txt", out_dir / "report.csv"};
  write_file(out.files[0], doc.dump(2) + "\n");
  write_file(out.files[1], render_table(rows));
  write_file(out.files[2], render_csv(rows));
  log_line("micro F1 " + std::to_string(out.report.micro_f1) + ", macro F1 " + std::to_string(out.report.macro_f1) +
           ", weighted F1 " + std::to_string(out.report.weighted_f1));
  return out;
}

struct ExperimentOutput {
  MetricsReport report;
  fs::path manifest;
};

/// split -> train -> predict dev -> evaluate, then a manifest of every produced file with its SHA-256.
inline ExperimentOutput cmd_experiment(const RunConfig& c) {
  validate(c);
  RunLock lock(c.run_dir());
  std::vector<fs::path> files = cmd_split(c);
  for (const auto& p : cmd_train(c)) files.push_back(p);
  files.push_back(cmd_predict(c, c.run_dir() / "model.json"));
  const auto ev = cmd_evaluate(c.run_dir() / "predictions.jsonl", c.corpora.at(c.target), c.catalog, c.run_dir(),
                               c.macro, config_to_json(c), c.name);
  files.insert(files.end(), ev.files.begin(), ev.files.end());

  json entries = json::array();
  for (const auto& p : files) {
    const std::string bytes = read_file(p);
    entries.push_back({{"path", p.filename().string()}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }
  json manifest = {{"run", c.name}, {"config", config_to_json(c)}, {"files", entries}};
  const auto mp = c.run_dir() / "manifest.json";
  write_file(mp, manifest.dump(2) + "\n");
  log_line("manifest -> " + mp.string());
  return {ev.report, mp};
}

}  // namespace esgclf::app
