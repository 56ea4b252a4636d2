// esgclf: split / train / predict / evaluate / experiment over a JSON run config.
// Exit codes: 0 ok, 1 internal failure, 2 input error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esgclf/app.hpp"

namespace {

using namespace esgclf;
namespace fs = std::filesystem;

struct Overrides {
  std::string config;
  std::optional<std::string> strategy;
  std::optional<std::size_t> k;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed_split;
  std::optional<std::uint64_t> seed_train;
  bool include_dev = false;
  std::optional<std::string> languages;
  std::optional<std::string> target;
  std::optional<std::string> out;
  std::optional<std::string> name;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run config")->required();
  cmd->add_option("--strategy", o.strategy, "svm-ee, ffn, ffn-ee or cnn-svm");
  cmd->add_option("--k", o.k, "labels emitted per article");
  cmd->add_option("--alpha", o.alpha, "svm-ee fusion weight on the SVM probability");
  cmd->add_option("--seed-split", o.seed_split, "split seed");
  cmd->add_option("--seed-train", o.seed_train, "training seed");
  cmd->add_flag("--include-dev", o.include_dev, "train on train + dev");
  cmd->add_option("--languages", o.languages, "comma-separated training languages");
  cmd->add_option("--target", o.target, "language whose dev split is predicted");
  cmd->add_option("--out", o.out, "output root directory");
  cmd->add_option("--name", o.name, "run name");
}

app::RunConfig resolve(const Overrides& o) {
  app::RunConfig c = app::load_config(o.config);
  if (o.strategy) c.strategy = strategy_from_string(*o.strategy);
  if (o.k) c.k = *o.k;
  if (o.alpha) c.strategy_config.fusion.alpha = *o.alpha;
  if (o.seed_split) c.split_seed = *o.seed_split;
  if (o.seed_train) c.train_seed = *o.seed_train;
  if (o.include_dev) c.include_dev = true;
  if (o.target) c.target = LanguageTag(*o.target).code();
  if (o.languages) {
    c.languages.clear();
    std::stringstream ss(*o.languages);
    for (std::string l; std::getline(ss, l, ',');) {
      if (!l.empty()) c.languages.push_back(LanguageTag(l).code());
    }
  }
  if (o.out) c.out = fs::absolute(*o.out).lexically_normal();
  if (o.name) c.name = *o.name;
  app::validate(c);
  return c;
}

int run(int argc, char** argv) {
  CLI::App cli{"ESG key-issue classification toolkit"};
  cli.require_subcommand(1);
  Overrides o;

  auto* split = cli.add_subcommand("split", "write the stratified train/dev split");
  add_common(split, o);

  auto* train = cli.add_subcommand("train", "train a strategy on the split's training part");
  add_common(train, o);

  std::string model_path;
  std::optional<std::string> input_path;
  std::optional<std::string> output_path;
  auto* predict = cli.add_subcommand("predict", "write ranked predictions as JSONL");
  add_common(predict, o);
  predict->add_option("--model", model_path, "model file (default: <run>/model.json)");
  predict->add_option("--input", input_path, "articles to predict (default: target dev split)");
  predict->add_option("--output", output_path, "predictions file (default: <run>/predictions.jsonl)");

  std::string predictions, gold, catalog, report_dir = ".";
  std::string macro = "observed";
  auto* evaluate = cli.add_subcommand("evaluate", "score predictions against gold labels");
  evaluate->add_option("--predictions", predictions, "predictions JSONL")->required();
  evaluate->add_option("--gold", gold, "gold corpus JSONL")->required();
  evaluate->add_option("--catalog", catalog, "label catalog JSON")->required();
  evaluate->add_option("--out", report_dir, "directory for report.json, report.txt, report.csv");
  evaluate->add_option("--macro", macro, "observed or all-catalog")->check(CLI::IsMember({"observed", "all-catalog"}));

  auto* experiment = cli.add_subcommand("experiment", "split, train, predict dev and evaluate in one run");
  add_common(experiment, o);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (split->parsed()) {
    app::cmd_split(resolve(o));
  } else if (train->parsed()) {
    app::cmd_train(resolve(o));
  } else if (predict->parsed()) {
    const auto c = resolve(o);
    const fs::path m = model_path.empty() ? c.run_dir() / "model.json" : fs::path(model_path);
    std::optional<fs::path> in, out;
    if (input_path) in = *input_path;
    if (output_path) out = *output_path;
    app::cmd_predict(c, m, in, out);
  } else if (evaluate->parsed()) {
    const auto ev = app::cmd_evaluate(predictions, gold, catalog, report_dir,
                                      macro == "observed" ? MacroAverage::observed : MacroAverage::all_catalog);
    std::cout << render_table({{"run", ev.report}});
  } else if (experiment->parsed()) {
    const auto c = resolve(o);
    const auto ex = app::cmd_experiment(c);
    std::cout << render_table({{c.name, ex.report}});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const esgclf::InputError& e) {
    std::cerr << "esgclf: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "esgclf: internal error: " << e.what() << '\n';
    return 1;
  }
}
