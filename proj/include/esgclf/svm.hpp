#pragma once

// Linear SVMs trained by dual coordinate descent, Platt probability
// calibration, and one-vs-rest scorers over a label catalog.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "esgclf/corpus.hpp"
#include "esgclf/embedding.hpp"
#include "esgclf/error.hpp"
#include "esgclf/rng.hpp"

namespace esgclf {

struct PlattParams {
  double A = 0.0;
  double B = 0.0;

  bool operator==(const PlattParams&) const = default;
};

namespace detail {

// Logistic function, evaluated on the branch that cannot overflow.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without cancellation.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace detail

/// P(y = +1 | f) = 1 / (1 + exp(A f + B)).
inline double platt_probability(const PlattParams& p, double decision) {
  return detail::sigmoid(-(p.A * decision + p.B));
}

struct BinarySvm {
  Vector weights;
  double bias = 0.0;
  double C = 1.0;
  std::optional<PlattParams> platt;

  double decision(std::span<const double> x) const {
    if (x.size() != weights.size()) {
      throw InputError("svm: input has dim " + std::to_string(x.size()) + ", model expects " +
                       std::to_string(weights.size()));
    }
    return dot(weights, x) + bias;
  }

  bool operator==(const BinarySvm&) const = default;
};

struct SvmParams {
  double C = 1.0;
  double tol = 1e-4;
  std::size_t max_iter = 1000;  // sweeps over the data
  std::uint64_t seed = 1;
};

struct SvmFitInfo {
  std::size_t sweeps = 0;
  bool converged = false;
  double max_violation = 0.0;
  // Objectives after each sweep, recorded when tracing is requested. Only the
  // dual is guaranteed to be monotone (non-decreasing).
  std::vector<double> primal_trace;
  std::vector<double> dual_trace;
};

/// (1/2)(|w|^2 + b^2) + C * sum_i max(0, 1 - y_i (w . x_i + b)).
///
/// The bias is an augmented constant feature, so it is regularized together
/// with the weights. This is the objective fit_binary minimizes.
inline double primal_objective(std::span<const double> w, double b, std::span<const Vector> X,
                               std::span<const int> y, double C) {
  double reg = dot(w, w) + b * b;
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    loss += std::max(0.0, 1.0 - y[i] * (dot(w, X[i]) + b));
  }
  return 0.5 * reg + C * loss;
}

inline double primal_objective(const BinarySvm& m, std::span<const Vector> X, std::span<const int> y) {
  return primal_objective(m.weights, m.bias, X, y, m.C);
}

namespace detail {

inline void check_binary_problem(std::span<const Vector> X, std::span<const int> y) {
  if (X.size() != y.size()) throw InputError("svm: X and y differ in length");
  if (X.size() < 2) throw InputError("svm: need at least two examples");
  bool pos = false;
  bool neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw InputError("svm: labels must be -1 or +1");
  }
  if (!(pos && neg)) throw InputError("svm: both classes must be present");
  const std::size_t d = X.front().size();
  if (d == 0) throw InputError("svm: zero-dimensional inputs");
  for (const auto& x : X) {
    if (x.size() != d) throw InputError("svm: inconsistent input dimensions");
  }
}

}  // namespace detail

/// Dual coordinate descent for the L1-loss (hinge) linear SVM.
///
/// Works on the augmented inputs (x, 1). Each sweep visits the dual
/// variables in a freshly shuffled order drawn from `params.seed`; the loop
/// stops once the largest projected-gradient magnitude of a sweep is below
/// `params.tol`, or after `params.max_iter` sweeps.
inline BinarySvm fit_binary(std::span<const Vector> X, std::span<const int> y, const SvmParams& params,
                            SvmFitInfo* info = nullptr, bool trace_objectives = false) {
  detail::check_binary_problem(X, y);
  if (!(params.C > 0.0)) throw InputError("svm: C must be positive");
  if (!(params.tol > 0.0)) throw InputError("svm: tol must be positive");

  const std::size_t n = X.size();
  const std::size_t d = X.front().size();
  const double upper = params.C;

  Vector w(d, 0.0);
  double b = 0.0;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> qdiag(n);
  for (std::size_t i = 0; i < n; ++i) qdiag[i] = dot(X[i], X[i]) + 1.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(params.seed);

  SvmFitInfo local;
  SvmFitInfo& out = info ? *info : local;
  out = {};

  for (std::size_t sweep = 0; sweep < params.max_iter; ++sweep) {
    rng.shuffle(std::span<std::size_t>(order));
    double max_pg = 0.0;
    for (std::size_t i : order) {
      const double yi = y[i];
      const double grad = yi * (dot(w, X[i]) + b) - 1.0;
      double pg = grad;
      if (alpha[i] == 0.0) pg = std::min(grad, 0.0);
      else if (alpha[i] == upper) pg = std::max(grad, 0.0);
      max_pg = std::max(max_pg, std::abs(pg));
      if (std::abs(pg) > 1e-12) {
        const double old = alpha[i];
        alpha[i] = std::clamp(old - grad / qdiag[i], 0.0, upper);
        const double step = (alpha[i] - old) * yi;
        for (std::size_t j = 0; j < d; ++j) w[j] += step * X[i][j];
        b += step;
      }
    }
    out.sweeps = sweep + 1;
    out.max_violation = max_pg;
    if (trace_objectives) {
      out.primal_trace.push_back(primal_objective(w, b, X, y, params.C));
      const double sum_alpha = std::accumulate(alpha.begin(), alpha.end(), 0.0);
      out.dual_trace.push_back(sum_alpha - 0.5 * (dot(w, w) + b * b));
    }
    if (max_pg < params.tol) {
      out.converged = true;
      break;
    }
  }

  BinarySvm m;
  m.weights = std::move(w);
  m.bias = b;
  m.C = params.C;
  return m;
}

// ---------------------------------------------------------------------------
// Platt scaling

struct PlattFit {
  PlattParams params;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Fits P(y=+1|f) = 1/(1 + exp(A f + B)) by damped Newton on the negative
/// log-likelihood with smoothed targets (N+ + 1)/(N+ + 2) and 1/(N- + 2).
///
/// Starts from A = 0, B = log(N- + 1) - log(N+ + 1) and backtracks on an
/// Armijo condition. Every quantity is computed through expressions that are
/// exactly antisymmetric in the class labels, so flipping y negates (A, B)
/// bit for bit. When all decisions are equal the slope is unidentifiable and
/// A is held at 0.
inline PlattFit fit_platt(std::span<const double> decisions, std::span<const int> y,
                          std::size_t max_iter = 100) {
  if (decisions.size() != y.size()) throw InputError("platt: decisions and labels differ in length");
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (int v : y) {
    if (v == 1) ++n_pos;
    else if (v == -1) ++n_neg;
    else throw InputError("platt: labels must be -1 or +1");
  }
  if (n_pos == 0 || n_neg == 0) throw InputError("platt: both classes must be present");
  for (double f : decisions) {
    if (!std::isfinite(f)) throw InputError("platt: non-finite decision value");
  }

  const double eps_pos = 1.0 / (static_cast<double>(n_pos) + 2.0);
  const double eps_neg = 1.0 / (static_cast<double>(n_neg) + 2.0);
  const auto [lo, hi] = std::minmax_element(decisions.begin(), decisions.end());
  const bool fit_slope = *hi > *lo;

  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;

  const std::size_t n = decisions.size();
  auto objective = [&](double A, double B) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = A * decisions[i] + B;
      const bool pos = y[i] == 1;
      const double eps = pos ? eps_pos : eps_neg;
      const double own = pos ? detail::log_sigmoid(-z) : detail::log_sigmoid(z);
      const double other = pos ? detail::log_sigmoid(z) : detail::log_sigmoid(-z);
      f -= (1.0 - eps) * own + eps * other;
    }
    return f;
  };

  PlattFit fit;
  double A = 0.0;
  double B = std::log(static_cast<double>(n_neg) + 1.0) - std::log(static_cast<double>(n_pos) + 1.0);
  double fval = objective(A, B);

  for (std::size_t it = 0; it < max_iter; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = decisions[i];
      const double z = A * f + B;
      const double p = detail::sigmoid(-z);
      const double q = detail::sigmoid(z);
      const double curvature = p * q;
      const double resid = y[i] == 1 ? q - eps_pos : eps_neg - p;  // d loss / d z
      h11 += f * f * curvature;
      h22 += curvature;
      h21 += f * curvature;
      g1 += f * resid;
      g2 += resid;
    }
    fit.iterations = it;
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) {
      fit.converged = true;
      break;
    }

    double dA = 0.0;
    double dB = 0.0;
    if (fit_slope) {
      const double det = h11 * h22 - h21 * h21;
      dA = -(h22 * g1 - h21 * g2) / det;
      dB = -(h11 * g2 - h21 * g1) / det;
    } else {
      dB = -g2 / h22;
    }
    const double gd = g1 * dA + g2 * dB;

    double step = 1.0;
    while (step >= kMinStep) {
      const double nA = A + step * dA;
      const double nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 0.0001 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;  // line search failed; report the last iterate
  }

  if (!fit.converged) {
    // A failed line search at a stationary point still counts as converged.
    double g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = A * decisions[i] + B;
      const double resid = y[i] == 1 ? detail::sigmoid(z) - eps_pos : eps_neg - detail::sigmoid(-z);
      g1 += decisions[i] * resid;
      g2 += resid;
    }
    fit.converged = std::abs(g1) < kEps && std::abs(g2) < kEps;
  }
  fit.params = {A, B};
  return fit;
}

// ---------------------------------------------------------------------------
// One-vs-rest

/// Scores for an ordered list of labels.
struct LabelScores {
  std::vector<LabelId> labels;
  std::vector<double> values;
  bool uncalibrated = false;  // some machine fell back to the uncalibrated sigmoid

  double at(const LabelId& id) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == id) return values[i];
    }
    throw InputError("no score for label '" + id + "'");
  }
};

/// Divides by the sum; an all-zero input becomes uniform.
inline LabelScores normalized(LabelScores s) {
  const double total = std::accumulate(s.values.begin(), s.values.end(), 0.0);
  for (double& v : s.values) {
    v = total > 0.0 ? v / total : 1.0 / static_cast<double>(s.values.size());
  }
  return s;
}

struct OneVsRestSvm {
  std::size_t dim = 0;
  std::vector<LabelId> labels;  // trained labels, catalog order
  std::map<LabelId, BinarySvm> machines;

  bool operator==(const OneVsRestSvm&) const = default;
};

struct OvrParams {
  SvmParams svm;
  std::size_t platt_max_iter = 100;
  std::size_t calibration_folds = 0;  // 0: calibrate on training decisions; >= 2: k-fold decisions
};

struct OvrReport {
  std::vector<LabelId> trained;
  std::vector<LabelId> skipped;  // no positive or no negative example
  std::vector<LabelId> platt_not_converged;
};

namespace detail {

inline std::vector<double> calibration_decisions(std::span<const Vector> X, std::span<const int> y,
                                                 const BinarySvm& full, const OvrParams& params) {
  std::vector<double> dec(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) dec[i] = full.decision(X[i]);
  if (params.calibration_folds < 2) return dec;

  const std::size_t k = std::min(params.calibration_folds, X.size());
  std::vector<std::size_t> perm(X.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(params.svm.seed ^ 0xC0FFEEULL);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::size_t> fold(X.size());
  for (std::size_t r = 0; r < perm.size(); ++r) fold[perm[r]] = r % k;

  for (std::size_t f = 0; f < k; ++f) {
    std::vector<Vector> Xt;
    std::vector<int> yt;
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (fold[i] != f) {
        Xt.push_back(X[i]);
        yt.push_back(y[i]);
      }
    }
    const bool both = std::find(yt.begin(), yt.end(), 1) != yt.end() &&
                      std::find(yt.begin(), yt.end(), -1) != yt.end();
    if (!both) continue;  // keep the full-model decisions for this fold
    const BinarySvm m = fit_binary(Xt, yt, params.svm);
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (fold[i] == f) dec[i] = m.decision(X[i]);
    }
  }
  return dec;
}

}  // namespace detail

/// One binary machine per catalog label that has both positive and negative
/// training examples; an article counts positive for every label in its gold set.
inline OneVsRestSvm fit_one_vs_rest(std::span<const Vector> X, std::span<const std::vector<LabelId>> gold,
                                    const LabelCatalog& catalog, const OvrParams& params,
                                    OvrReport* report = nullptr) {
  if (X.size() != gold.size()) throw InputError("one-vs-rest: inputs and gold sets differ in length");
  if (X.empty()) throw InputError("one-vs-rest: no training data");
  OneVsRestSvm model;
  model.dim = X.front().size();
  OvrReport local;
  OvrReport& rep = report ? *report : local;
  rep = {};

  for (const auto& entry : catalog.entries()) {
    std::vector<int> y(X.size(), -1);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (std::find(gold[i].begin(), gold[i].end(), entry.id) != gold[i].end()) {
        y[i] = 1;
        ++pos;
      }
    }
    if (pos == 0 || pos == X.size()) {
      rep.skipped.push_back(entry.id);
      continue;
    }
    BinarySvm m = fit_binary(X, y, params.svm);
    const auto dec = detail::calibration_decisions(X, y, m, params);
    const PlattFit pf = fit_platt(dec, y, params.platt_max_iter);
    if (!pf.converged) rep.platt_not_converged.push_back(entry.id);
    m.platt = pf.params;
    model.labels.push_back(entry.id);
    model.machines.emplace(entry.id, std::move(m));
    rep.trained.push_back(entry.id);
  }
  return model;
}

namespace detail {

inline double machine_probability(const BinarySvm& m, std::span<const double> x, bool& fallback) {
  const double f = m.decision(x);
  if (m.platt) return platt_probability(*m.platt, f);
  fallback = true;
  return platt_probability({-1.0, 0.0}, f);
}

}  // namespace detail

/// Per-label Platt probabilities for the trained labels, not normalized across labels.
inline LabelScores predict_proba(const OneVsRestSvm& model, std::span<const double> x) {
  if (x.size() != model.dim) {
    throw InputError("predict_proba: input has dim " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.dim));
  }
  LabelScores s;
  for (const auto& l : model.labels) {
    s.labels.push_back(l);
    s.values.push_back(detail::machine_probability(model.machines.at(l), x, s.uncalibrated));
  }
  return s;
}

/// Same, over every catalog label; labels without a machine score 0.
inline LabelScores predict_proba(const OneVsRestSvm& model, std::span<const double> x,
                                 const LabelCatalog& catalog) {
  if (x.size() != model.dim) {
    throw InputError("predict_proba: input has dim " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.dim));
  }
  LabelScores s;
  for (const auto& e : catalog.entries()) {
    s.labels.push_back(e.id);
    auto it = model.machines.find(e.id);
    s.values.push_back(it == model.machines.end() ? 0.0
                                                  : detail::machine_probability(it->second, x, s.uncalibrated));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

inline json ovr_to_json(const OneVsRestSvm& m) {
  json machines = json::object();
  for (const auto& l : m.labels) {
    const auto& b = m.machines.at(l);
    json platt = b.platt ? json{{"A", b.platt->A}, {"B", b.platt->B}} : json(nullptr);
    machines[l] = {{"w", b.weights}, {"b", b.bias}, {"C", b.C}, {"platt", platt}};
  }
  return {{"dim", m.dim}, {"labels", m.labels}, {"machines", machines}};
}

inline OneVsRestSvm ovr_from_json(const json& doc) {
  OneVsRestSvm m;
  try {
    m.dim = doc.at("dim").get<std::size_t>();
    m.labels = doc.at("labels").get<std::vector<LabelId>>();
    for (const auto& l : m.labels) {
      const auto& j = doc.at("machines").at(l);
      BinarySvm b;
      b.weights = j.at("w").get<Vector>();
      b.bias = j.at("b").get<double>();
      b.C = j.at("C").get<double>();
      if (!j.at("platt").is_null()) b.platt = PlattParams{j["platt"].at("A").get<double>(), j["platt"].at("B").get<double>()};
      if (b.weights.size() != m.dim) throw InputError("svm model: machine '" + l + "' has the wrong dimension");
      m.machines.emplace(l, std::move(b));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed svm model: ") + e.what());
  }
  return m;
}

}  // namespace esgclf
