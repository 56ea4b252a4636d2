#include <gtest/gtest.h>

#include <random>

#include "esgclf/eval.hpp"
#include "oracles.hpp"

using namespace esgclf;

namespace {

LabelCatalog abc() { return LabelCatalog({{"A", "A", "a"}, {"B", "B", "b"}, {"C", "C", "c"}}); }

Prediction emit(const std::string& id, std::vector<LabelId> labels) {
  Prediction p;
  p.article_id = id;
  p.emitted = labels;
  for (const auto& l : labels) p.ranked.emplace_back(l, 1.0);
  return p;
}

// Four single-label articles with two right and two wrong.
std::pair<std::vector<Prediction>, GoldMap> four_articles() {
  GoldMap gold{{"1", {"A"}}, {"2", {"A"}}, {"3", {"B"}}, {"4", {"B"}}};
  std::vector<Prediction> preds{emit("1", {"A"}), emit("2", {"B"}), emit("3", {"B"}), emit("4", {"A"})};
  return {preds, gold};
}

MetricsReport report_with(const std::vector<Outcome>& counts, std::size_t n = 0, std::size_t exact = 0) {
  LabelCounts c;
  for (std::size_t i = 0; i < counts.size(); ++i) c.labels.push_back("L" + std::to_string(i));
  c.counts = counts;
  return compute_report(c, n, exact);
}

}  // namespace

TEST(Evaluate, FourArticleFixtureIsHalfEverywhere) {
  const auto [preds, gold] = four_articles();
  const auto r = evaluate(preds, gold, abc());
  for (double v : {r.micro_precision, r.micro_recall, r.micro_f1, r.macro_f1, r.weighted_f1, r.accuracy}) {
    EXPECT_DOUBLE_EQ(v, 0.5);
  }
  EXPECT_DOUBLE_EQ(r.label("A").f1, 0.5);
  EXPECT_EQ(r.label("C").support, 0u);
}

TEST(Evaluate, PartialMultiLabelMatch) {
  const auto r = evaluate({emit("x", {"A"})}, {{"x", {"A", "B"}}}, abc());
  EXPECT_DOUBLE_EQ(r.micro_precision, 1.0);
  EXPECT_DOUBLE_EQ(r.micro_recall, 0.5);
  EXPECT_NEAR(r.micro_f1, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.label("A").f1, 1.0);
  EXPECT_DOUBLE_EQ(r.label("B").f1, 0.0);
  EXPECT_DOUBLE_EQ(r.macro_f1, 0.5);
  EXPECT_DOUBLE_EQ(r.weighted_f1, 0.5);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.0);
}

TEST(Evaluate, PerfectPredictionsScoreOne) {
  const GoldMap gold{{"1", {"A", "C"}}, {"2", {"B"}}, {"3", {"C"}}};
  const auto r = evaluate({emit("1", {"C", "A"}), emit("2", {"B"}), emit("3", {"C"})}, gold, abc());
  for (double v : {r.micro_precision, r.micro_recall, r.micro_f1, r.macro_f1, r.weighted_f1, r.accuracy}) {
    EXPECT_DOUBLE_EQ(v, 1.0);
  }
}

TEST(Evaluate, SingleLabelTopOneMicroF1EqualsAccuracy) {
  std::mt19937 gen(5);
  const std::vector<LabelId> ids{"A", "B", "C"};
  for (int trial = 0; trial < 20; ++trial) {
    GoldMap gold;
    std::vector<Prediction> preds;
    for (int i = 0; i < 15; ++i) {
      const auto id = std::to_string(i);
      gold[id] = {ids[gen() % 3]};
      preds.push_back(emit(id, {ids[gen() % 3]}));
    }
    const auto r = evaluate(preds, gold, abc());
    EXPECT_NEAR(r.micro_f1, r.accuracy, 1e-15);
    EXPECT_NEAR(r.micro_precision, r.micro_recall, 1e-15);
  }
}

TEST(ComputeReport, ZeroDenominatorsGiveZero) {
  const auto r = report_with({{0, 0, 0}, {0, 3, 0}, {0, 0, 2}});
  EXPECT_EQ(r.per_label[0].f1, 0.0);
  EXPECT_EQ(r.per_label[1].precision, 0.0);
  EXPECT_EQ(r.per_label[1].recall, 0.0);
  EXPECT_EQ(r.per_label[2].precision, 0.0);
  EXPECT_EQ(r.micro_f1, 0.0);
  EXPECT_EQ(r.accuracy, 0.0);
  const auto empty = report_with({});
  EXPECT_EQ(empty.macro_f1, 0.0);
  EXPECT_EQ(empty.weighted_f1, 0.0);
}

TEST(ComputeReport, MacroModes) {
  LabelCounts c;
  c.labels = {"A", "B", "C"};
  c.counts = {{2, 0, 0}, {0, 0, 0}, {1, 1, 1}};
  const auto obs = compute_report(c, 3, 1);
  const auto all = compute_report(c, 3, 1, MacroAverage::all_catalog);
  EXPECT_DOUBLE_EQ(obs.macro_f1, (1.0 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(all.macro_f1, (1.0 + 0.5) / 3);
  EXPECT_DOUBLE_EQ(obs.weighted_f1, all.weighted_f1);
}

TEST(ComputeReport, WeightedF1BetweenMinAndMaxSupportedF1) {
  std::mt19937 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Outcome> counts;
    for (int l = 0; l < 5; ++l) counts.push_back({gen() % 5, gen() % 5, gen() % 5});
    const auto r = report_with(counts);
    double lo = 1, hi = 0;
    bool any = false;
    for (const auto& m : r.per_label) {
      if (m.support == 0) continue;
      any = true;
      lo = std::min(lo, m.f1);
      hi = std::max(hi, m.f1);
    }
    if (!any) continue;
    EXPECT_GE(r.weighted_f1, lo - 1e-15);
    EXPECT_LE(r.weighted_f1, hi + 1e-15);
  }
}

TEST(Evaluate, RecallNeverDropsAsKGrows) {
  std::mt19937 gen(3);
  const LabelCatalog catalog({{"a", "a", "a"}, {"b", "b", "b"}, {"c", "c", "c"}, {"d", "d", "d"}, {"e", "e", "e"}});
  const auto ids = catalog.ids();
  GoldMap gold;
  std::vector<std::vector<LabelId>> rankings;
  for (int i = 0; i < 30; ++i) {
    auto r = ids;
    std::shuffle(r.begin(), r.end(), gen);
    rankings.push_back(r);
    const std::size_t first = gen() % 5;
    gold[std::to_string(i)] = {ids[first]};
    if (gen() % 2) gold[std::to_string(i)].push_back(ids[(first + 1 + gen() % 4) % 5]);
  }
  double prev = -1;
  for (std::size_t k = 1; k <= 5; ++k) {
    std::vector<Prediction> preds;
    for (int i = 0; i < 30; ++i) preds.push_back(emit(std::to_string(i), {rankings[i].begin(), rankings[i].begin() + k}));
    const auto r = evaluate(preds, gold, catalog);
    EXPECT_GE(r.micro_recall, prev);
    prev = r.micro_recall;
  }
  EXPECT_DOUBLE_EQ(prev, 1.0);
}

TEST(Evaluate, AgreesWithBruteForceRecount) {
  std::mt19937 gen(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 1 + gen() % 5;
    std::vector<LabelEntry> entries;
    std::vector<std::string> ids;
    for (std::size_t l = 0; l < L; ++l) {
      ids.push_back("l" + std::to_string(l));
      entries.push_back({ids.back(), ids.back(), ids.back()});
    }
    const LabelCatalog catalog(entries);
    const std::size_t n = 1 + gen() % 20;
    GoldMap gold;
    std::vector<Prediction> preds;
    std::vector<std::pair<std::set<std::string>, std::set<std::string>>> cases;
    for (std::size_t i = 0; i < n; ++i) {
      std::set<std::string> g{ids[gen() % L]};
      while (gen() % 3 == 0 && g.size() < L) g.insert(ids[gen() % L]);
      auto ranking = ids;
      std::shuffle(ranking.begin(), ranking.end(), gen);
      const std::size_t k = std::min<std::size_t>(L, 1 + gen() % 3);
      const std::vector<LabelId> e(ranking.begin(), ranking.begin() + k);
      gold[std::to_string(i)] = {g.begin(), g.end()};
      preds.push_back(emit(std::to_string(i), e));
      cases.emplace_back(g, std::set<std::string>(e.begin(), e.end()));
    }
    for (bool all : {false, true}) {
      const auto r = evaluate(preds, gold, catalog, all ? MacroAverage::all_catalog : MacroAverage::observed);
      const auto o = oracle::recount(ids, cases, all);
      EXPECT_NEAR(r.micro_precision, o.micro_p, 1e-12);
      EXPECT_NEAR(r.micro_recall, o.micro_r, 1e-12);
      EXPECT_NEAR(r.micro_f1, o.micro_f1, 1e-12);
      EXPECT_NEAR(r.macro_f1, o.macro_f1, 1e-12);
      EXPECT_NEAR(r.weighted_f1, o.weighted_f1, 1e-12);
      EXPECT_NEAR(r.accuracy, o.accuracy, 1e-12);
      for (const auto& m : r.per_label) {
        EXPECT_NEAR(m.f1, o.f1.at(m.label), 1e-12);
        EXPECT_EQ(static_cast<double>(m.support), o.support.at(m.label));
      }
    }
  }
}

TEST(Evaluate, RejectsInconsistentInputs) {
  const auto [preds, gold] = four_articles();
  auto dup = preds;
  dup.push_back(preds[0]);
  EXPECT_THROW(evaluate(dup, gold, abc()), InputError);
  auto stranger = preds;
  stranger.push_back(emit("99", {"A"}));
  EXPECT_THROW(evaluate(stranger, gold, abc()), InputError);
  EXPECT_THROW(evaluate({emit("1", {"Z"})}, gold, abc()), InputError);
}

TEST(Evaluate, DuplicateEmittedLabelsCountOnce) {
  const auto r = evaluate({emit("x", {"A", "A"})}, {{"x", {"A"}}}, abc());
  EXPECT_EQ(r.label("A").predicted, 1u);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
}

TEST(CompareRuns, SortsByKeyMetricThenName) {
  auto row = [](std::string name, double wf1) {
    MetricsReport r;
    r.weighted_f1 = wf1;
    r.accuracy = 1 - wf1;
    return RunRow{std::move(name), r};
  };
  const auto sorted = compare_runs({row("mono", 0.1791), row("svm-ee", 0.2633), row("ffn", 0.2332),
                                    row("b-tie", 0.2332)});
  std::vector<std::string> names;
  for (const auto& r : sorted) names.push_back(r.run);
  EXPECT_EQ(names, (std::vector<std::string>{"svm-ee", "b-tie", "ffn", "mono"}));
  EXPECT_EQ(compare_runs(sorted, KeyMetric::accuracy).front().run, "mono");
}

TEST(Render, TableAndCsv) {
  MetricsReport r;
  r.accuracy = 0.5;
  r.micro_f1 = 0.25;
  r.macro_f1 = 0.125;
  r.weighted_f1 = 1.0 / 3.0;
  const std::vector<RunRow> rows{{"run-a", r}};
  const auto table = render_table(rows);
  EXPECT_NE(table.find("Run"), std::string::npos);
  EXPECT_NE(table.find("WF1"), std::string::npos);
  EXPECT_NE(table.find("run-a   0.5000   0.2500   0.1250   0.3333"), std::string::npos) << table;
  const auto csv = render_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "run,accuracy,micro_f1,macro_f1,weighted_f1");
  EXPECT_NE(csv.find("run-a,0.5,0.25,0.125,0.33333333333333331"), std::string::npos) << csv;
}

TEST(ReportJson, CarriesAllAggregates) {
  const auto [preds, gold] = four_articles();
  const json j = report_to_json(evaluate(preds, gold, abc()));
  for (const char* k : {"micro_precision", "micro_recall", "micro_f1", "macro_f1", "weighted_f1", "accuracy"}) {
    EXPECT_DOUBLE_EQ(j.at(k).get<double>(), 0.5) << k;
  }
  EXPECT_EQ(j.at("per_label").size(), 3u);
  EXPECT_EQ(j.at("n_articles"), 4);
}
