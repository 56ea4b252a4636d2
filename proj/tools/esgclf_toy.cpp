// Writes a synthetic catalog, corpora, toy-embedded stores and a run config
// into one directory, ready for `esgclf experiment --config <dir>/config.json`.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "esgclf/app.hpp"
#include "esgclf/toydata.hpp"

namespace {

using namespace esgclf;
namespace fs = std::filesystem;

// "en:50" gives every label 50 articles; "fr:6,5,4,3,3,2" lists per-label supports.
std::pair<std::string, std::vector<std::size_t>> parse_language(const std::string& spec, std::size_t labels) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InputError("--language expects lang:count[,count...], got '" + spec + "'");
  const std::string lang = LanguageTag(spec.substr(0, colon)).code();
  std::vector<std::size_t> supports;
  std::stringstream ss(spec.substr(colon + 1));
  for (std::string n; std::getline(ss, n, ',');) supports.push_back(std::stoul(n));
  if (supports.size() == 1) supports.assign(labels, supports.front());
  if (supports.size() != labels) throw InputError("--language " + spec + ": expected 1 or " + std::to_string(labels) + " counts");
  return {lang, supports};
}

int run(int argc, char** argv) {
  CLI::App cli{"synthetic corpus generator for esgclf"};
  std::string out;
  std::size_t labels = 6;
  std::vector<std::string> languages{"en:50"};
  std::size_t dim = 64;
  std::uint64_t seed = 7;
  double keyword_rate = 0.4;
  double multi_label_rate = 0.0;
  std::string strategy = "svm-ee";
  cli.add_option("--out", out, "output directory")->required();
  cli.add_option("--labels", labels, "number of labels");
  cli.add_option("--language", languages, "lang:count or lang:c1,c2,... (repeatable; first is the target)");
  cli.add_option("--dim", dim, "embedding dimension");
  cli.add_option("--seed", seed, "corpus and embedding seed");
  cli.add_option("--keyword-rate", keyword_rate, "fraction of label keywords per article");
  cli.add_option("--multi-label-rate", multi_label_rate, "fraction of articles with 2-3 labels");
  cli.add_option("--strategy", strategy, "strategy written into config.json");
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const fs::path dir(out);
  fs::create_directories(dir);
  const LabelCatalog catalog = toy::make_catalog(labels);
  save_catalog(catalog, dir / "catalog.json");

  json corpora = json::object();
  std::vector<std::string> langs;
  std::vector<Article> all;
  std::uint64_t offset = 0;
  for (const auto& spec : languages) {
    auto [lang, supports] = parse_language(spec, labels);
    toy::CorpusSpec cs;
    cs.language = lang;
    cs.supports = supports;
    cs.keyword_rate = keyword_rate;
    cs.multi_label_rate = multi_label_rate;
    cs.seed = seed + offset;
    offset += 100;
    const auto articles = toy::make_corpus(cs, catalog);
    const std::string file = "corpus." + lang + ".jsonl";
    write_corpus(articles, dir / file);
    corpora[lang] = file;
    langs.push_back(lang);
    all.insert(all.end(), articles.begin(), articles.end());
  }
  const auto stores = toy::embed_all(all, catalog, dim, seed);
  save_store(stores.article, dir / "article.store.jsonl");
  save_store(stores.label, dir / "label.store.jsonl");
  save_store(stores.token, dir / "token.store.jsonl");

  const json config = {{"name", "toy-" + strategy},
                       {"catalog", "catalog.json"},
                       {"corpora", corpora},
                       {"stores", {{"article", "article.store.jsonl"}, {"label", "label.store.jsonl"}, {"token", "token.store.jsonl"}}},
                       {"out", "runs"},
                       {"strategy", strategy},
                       {"target", langs.front()},
                       {"languages", json::array({langs.front()})},
                       {"k", 1},
                       {"seeds", {{"split", 13}, {"train", 7}}}};
  app::write_file(dir / "config.json", config.dump(2) + "\n");
  std::cerr << "[esgclf-toy] " << all.size() << " articles, " << labels << " labels -> " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const esgclf::InputError& e) {
    std::cerr << "esgclf-toy: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "esgclf-toy: internal error: " << e.what() << '\n';
    return 1;
  }
}
