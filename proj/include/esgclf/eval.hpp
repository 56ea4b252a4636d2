#pragma once

// Per-label precision/recall/F1 with micro, macro and weighted aggregates,
// exact-match accuracy, and run comparison tables.

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "esgclf/corpus.hpp"
#include "esgclf/error.hpp"
#include "esgclf/strategies.hpp"

namespace esgclf {

struct Outcome {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t support() const { return tp + fn; }
  std::size_t predicted() const { return tp + fp; }

  bool operator==(const Outcome&) const = default;
};

struct LabelCounts {
  std::vector<LabelId> labels;  // catalog order
  std::vector<Outcome> counts;
  std::size_t n_articles = 0;
  std::size_t exact_matches = 0;  // emitted set == gold set
};

using GoldMap = std::unordered_map<std::string, std::vector<LabelId>>;

inline GoldMap gold_map(const std::vector<Article>& articles) {
  GoldMap g;
  for (const auto& a : articles) g.emplace(a.id, a.gold_labels);
  return g;
}

/// Set semantics per article: tp for emitted and gold, fp for emitted only,
/// fn for gold only.
inline LabelCounts count_label_outcomes(const std::vector<Prediction>& predictions, const GoldMap& gold,
                                        const LabelCatalog& catalog) {
  LabelCounts out;
  out.labels = catalog.ids();
  out.counts.assign(catalog.size(), {});
  std::unordered_set<std::string> seen;
  for (const auto& p : predictions) {
    if (!seen.insert(p.article_id).second) throw InputError("duplicate prediction for article '" + p.article_id + "'");
    auto it = gold.find(p.article_id);
    if (it == gold.end()) throw InputError("no gold labels for article '" + p.article_id + "'");
    std::set<std::size_t> emitted;
    for (const auto& l : p.emitted) {
      if (!catalog.contains(l)) throw InputError("prediction for '" + p.article_id + "' emits unknown label '" + l + "'");
      emitted.insert(catalog.index_of(l));
    }
    std::set<std::size_t> truth;
    for (const auto& l : it->second) truth.insert(catalog.index_of(l));
    for (std::size_t c : emitted) {
      if (truth.contains(c)) ++out.counts[c].tp;
      else ++out.counts[c].fp;
    }
    for (std::size_t c : truth) {
      if (!emitted.contains(c)) ++out.counts[c].fn;
    }
    if (emitted == truth) ++out.exact_matches;
    ++out.n_articles;
  }
  return out;
}

struct LabelMetrics {
  LabelId label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  std::size_t predicted = 0;
};

enum class MacroAverage {
  observed,     // labels with support > 0 or at least one prediction
  all_catalog,  // every catalog label
};

struct MetricsReport {
  std::vector<LabelMetrics> per_label;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t n_articles = 0;

  const LabelMetrics& label(const LabelId& id) const {
    for (const auto& m : per_label) {
      if (m.label == id) return m;
    }
    throw InputError("report has no label '" + id + "'");
  }
};

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double f1_score(double precision, double recall) {
  return safe_ratio(2.0 * precision * recall, precision + recall);
}

inline MetricsReport compute_report(const LabelCounts& counts, std::size_t n_articles, std::size_t exact_match_count,
                                    MacroAverage macro = MacroAverage::observed) {
  MetricsReport r;
  r.n_articles = n_articles;
  double tp = 0, fp = 0, fn = 0;
  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  double weighted_sum = 0.0;
  double support_sum = 0.0;
  for (std::size_t i = 0; i < counts.labels.size(); ++i) {
    const Outcome& o = counts.counts[i];
    LabelMetrics m;
    m.label = counts.labels[i];
    m.precision = safe_ratio(o.tp, o.predicted());
    m.recall = safe_ratio(o.tp, o.support());
    m.f1 = f1_score(m.precision, m.recall);
    m.support = o.support();
    m.predicted = o.predicted();
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    if (macro == MacroAverage::all_catalog || m.support > 0 || m.predicted > 0) {
      macro_sum += m.f1;
      ++macro_n;
    }
    weighted_sum += static_cast<double>(m.support) * m.f1;
    support_sum += static_cast<double>(m.support);
    r.per_label.push_back(std::move(m));
  }
  r.micro_precision = safe_ratio(tp, tp + fp);
  r.micro_recall = safe_ratio(tp, tp + fn);
  r.micro_f1 = f1_score(r.micro_precision, r.micro_recall);
  r.macro_f1 = safe_ratio(macro_sum, static_cast<double>(macro_n));
  r.weighted_f1 = safe_ratio(weighted_sum, support_sum);
  r.accuracy = safe_ratio(static_cast<double>(exact_match_count), static_cast<double>(n_articles));
  return r;
}

inline MetricsReport evaluate(const std::vector<Prediction>& predictions, const GoldMap& gold,
                              const LabelCatalog& catalog, MacroAverage macro = MacroAverage::observed) {
  const LabelCounts c = count_label_outcomes(predictions, gold, catalog);
  return compute_report(c, c.n_articles, c.exact_matches, macro);
}

inline json report_to_json(const MetricsReport& r) {
  json per = json::object();
  for (const auto& m : r.per_label) {
    per[m.label] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  return {{"per_label", per},
          {"micro_precision", r.micro_precision},
          {"micro_recall", r.micro_recall},
          {"micro_f1", r.micro_f1},
          {"macro_f1", r.macro_f1},
          {"weighted_f1", r.weighted_f1},
          {"accuracy", r.accuracy},
          {"n_articles", r.n_articles}};
}

// ---------------------------------------------------------------------------
// Run comparison

enum class KeyMetric { weighted_f1, micro_f1, macro_f1, accuracy };

inline double metric_value(const MetricsReport& r, KeyMetric k) {
  switch (k) {
    case KeyMetric::weighted_f1: return r.weighted_f1;
    case KeyMetric::micro_f1: return r.micro_f1;
    case KeyMetric::macro_f1: return r.macro_f1;
    case KeyMetric::accuracy: return r.accuracy;
  }
  return 0.0;
}

struct RunRow {
  std::string run;
  MetricsReport report;
};

/// Sorted by the key metric, best first; ties by run name.
inline std::vector<RunRow> compare_runs(std::vector<RunRow> runs, KeyMetric key = KeyMetric::weighted_f1) {
  std::stable_sort(runs.begin(), runs.end(), [key](const RunRow& a, const RunRow& b) {
    const double va = metric_value(a.report, key);
    const double vb = metric_value(b.report, key);
    if (va != vb) return va > vb;
    return a.run < b.run;
  });
  return runs;
}

inline std::string render_table(const std::vector<RunRow>& rows) {
  std::size_t w = 3;
  for (const auto& r : rows) w = std::max(w, r.run.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << "Run" << std::right;
  for (const char* h : {"Acc.", "Mic. F1", "Mac. F1", "WF1"}) os << "  " << std::setw(7) << h;
  os << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << r.run << std::right;
    for (double v : {r.report.accuracy, r.report.micro_f1, r.report.macro_f1, r.report.weighted_f1}) {
      os << "  " << std::setw(7) << v;
    }
    os << '\n';
  }
  return os.str();
}

inline std::string render_csv(const std::vector<RunRow>& rows) {
  std::ostringstream os;
  os << "run,accuracy,micro_f1,macro_f1,weighted_f1\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.run << ',' << r.report.accuracy << ',' << r.report.micro_f1 << ',' << r.report.macro_f1 << ','
       << r.report.weighted_f1 << '\n';
  }
  return os.str();
}

}  // namespace esgclf
