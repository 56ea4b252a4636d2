#pragma once

// Small dense and convolutional networks with hand-written backpropagation,
// inverted dropout and softmax cross-entropy training.
//
// Three models share one classifier head (optional ReLU hidden layer,
// dropout, linear output):
//   FfnHeadModel       article vector            -> head
//   FfnEeFusionModel   [article | label cosines]  -> head
//   CnnHeadModel       token matrix -> conv bank (widths 1..5, max-pool) -> head

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "esgclf/corpus.hpp"
#include "esgclf/embedding.hpp"
#include "esgclf/error.hpp"
#include "esgclf/rng.hpp"

namespace esgclf {

enum class Mode { train, eval };

enum class Activation { relu, identity };

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct DenseLayer {
  Matrix W;  // out x in
  Vector b;  // out
  Activation activation = Activation::identity;

  std::size_t in() const { return W.cols; }
  std::size_t out() const { return W.rows; }

  bool operator==(const DenseLayer&) const = default;
};

struct ConvGroup {
  std::size_t width = 1;
  Matrix W;  // maps x (width * dim); row m is filter m flattened token-major
  Vector b;  // maps

  bool operator==(const ConvGroup&) const = default;
};

inline constexpr std::array<std::size_t, 5> kConvWidths{1, 2, 3, 4, 5};

struct ConvBank {
  std::size_t dim = 0;
  std::size_t maps = 0;
  std::array<ConvGroup, 5> groups;

  std::size_t output_size() const { return groups.size() * maps; }

  bool operator==(const ConvBank&) const = default;
};

/// Hidden ReLU layer (optional), inverted dropout, linear output to one logit per label.
struct ClassifierHead {
  std::optional<DenseLayer> hidden;
  DenseLayer output;
  double dropout = 0.2;

  std::size_t input_size() const { return hidden ? hidden->in() : output.in(); }
  std::size_t width() const { return output.out(); }

  bool operator==(const ClassifierHead&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  std::size_t hidden = 128;  // 0 disables the hidden layer
  double dropout = 0.2;
  std::size_t feature_maps = 32;  // per conv width

  bool operator==(const TrainConfig&) const = default;
};

enum class FusionInputMode { similarities, concat_definitions };

struct FfnHeadModel {
  ClassifierHead head;
  TrainConfig config;
  std::uint64_t version = 0;

  bool operator==(const FfnHeadModel& o) const { return head == o.head && config == o.config; }
};

struct FfnEeFusionModel {
  ClassifierHead head;
  FusionInputMode fusion = FusionInputMode::similarities;
  TrainConfig config;
  std::uint64_t version = 0;

  bool operator==(const FfnEeFusionModel& o) const {
    return head == o.head && fusion == o.fusion && config == o.config;
  }
};

struct CnnHeadModel {
  ConvBank conv;
  ClassifierHead head;
  TrainConfig config;
  std::uint64_t version = 0;

  bool operator==(const CnnHeadModel& o) const { return conv == o.conv && head == o.head && config == o.config; }
};

// ---------------------------------------------------------------------------
// Initialization

namespace detail {

inline void he_uniform(Matrix& m, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& x : m.data) x = rng.uniform(-limit, limit);
}

inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer l;
  l.W = Matrix(out, in);
  l.b.assign(out, 0.0);
  l.activation = act;
  he_uniform(l.W, in, rng);
  return l;
}

}  // namespace detail

inline ClassifierHead make_head(std::size_t input, std::size_t labels, std::size_t hidden, double dropout,
                                Rng& rng) {
  if (input == 0 || labels == 0) throw InputError("head: input and output sizes must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("head: dropout rate must lie in [0, 1)");
  ClassifierHead h;
  h.dropout = dropout;
  std::size_t cur = input;
  if (hidden > 0) {
    h.hidden = detail::make_dense(input, hidden, Activation::relu, rng);
    cur = hidden;
  }
  h.output = detail::make_dense(cur, labels, Activation::identity, rng);
  return h;
}

inline ConvBank make_conv_bank(std::size_t dim, std::size_t maps, Rng& rng) {
  if (dim == 0 || maps == 0) throw InputError("conv bank: dim and maps must be positive");
  ConvBank bank;
  bank.dim = dim;
  bank.maps = maps;
  for (std::size_t g = 0; g < kConvWidths.size(); ++g) {
    auto& grp = bank.groups[g];
    grp.width = kConvWidths[g];
    grp.W = Matrix(maps, grp.width * dim);
    grp.b.assign(maps, 0.0);
    detail::he_uniform(grp.W, grp.width * dim, rng);
  }
  return bank;
}

inline FfnHeadModel make_ffn(std::size_t input, std::size_t labels, const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  return {make_head(input, labels, cfg.hidden, cfg.dropout, rng), cfg, 0};
}

inline FfnEeFusionModel make_ffn_ee(std::size_t input, std::size_t labels, FusionInputMode mode,
                                    const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  return {make_head(input, labels, cfg.hidden, cfg.dropout, rng), mode, cfg, 0};
}

inline CnnHeadModel make_cnn(std::size_t dim, std::size_t labels, const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  CnnHeadModel m;
  m.conv = make_conv_bank(dim, cfg.feature_maps, rng);
  m.head = make_head(m.conv.output_size(), labels, cfg.hidden, cfg.dropout, rng);
  m.config = cfg;
  return m;
}

// ---------------------------------------------------------------------------
// Parameter views. Gradients use the same block layout.

using Gradients = std::vector<Vector>;

namespace detail {

inline void append_blocks(ClassifierHead& h, std::vector<std::span<double>>& out) {
  if (h.hidden) {
    out.emplace_back(h.hidden->W.data);
    out.emplace_back(h.hidden->b);
  }
  out.emplace_back(h.output.W.data);
  out.emplace_back(h.output.b);
}

}  // namespace detail

inline std::vector<std::span<double>> parameter_blocks(FfnHeadModel& m) {
  std::vector<std::span<double>> out;
  detail::append_blocks(m.head, out);
  return out;
}

inline std::vector<std::span<double>> parameter_blocks(FfnEeFusionModel& m) {
  std::vector<std::span<double>> out;
  detail::append_blocks(m.head, out);
  return out;
}

inline std::vector<std::span<double>> parameter_blocks(CnnHeadModel& m) {
  std::vector<std::span<double>> out;
  for (auto& g : m.conv.groups) {
    out.emplace_back(g.W.data);
    out.emplace_back(g.b);
  }
  detail::append_blocks(m.head, out);
  return out;
}

template <typename Model>
Gradients zero_gradients(Model& m) {
  Gradients g;
  for (auto blk : parameter_blocks(m)) g.emplace_back(blk.size(), 0.0);
  return g;
}

// ---------------------------------------------------------------------------
// Dropout

/// Inverted dropout mask: each entry is 0 with probability `rate`, else 1/(1-rate).
inline Vector dropout_mask(std::size_t n, double rate, Rng& rng) {
  Vector m(n, 1.0);
  if (rate <= 0.0) return m;
  const double keep = 1.0 / (1.0 - rate);
  for (double& x : m) x = rng.bernoulli(rate) ? 0.0 : keep;
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct HeadCache {
  Vector input;
  Vector hidden_pre;  // empty without a hidden layer
  Vector mask;        // empty in eval mode
  Vector dropped;     // output-layer input
};

struct ConvCache {
  std::size_t length = 0;
  // Per output unit (group-major, then map): window start of the max, or -1
  // when the sequence is shorter than the filter. `active` marks ReLU > 0.
  std::vector<long> argmax;
  std::vector<char> active;
  const TokenMatrix* tokens = nullptr;
};

struct ForwardCache {
  const void* owner = nullptr;
  std::uint64_t version = 0;
  Mode mode = Mode::eval;
  HeadCache head;
  std::optional<ConvCache> conv;
};

struct ForwardResult {
  Vector logits;
  ForwardCache cache;
};

/// Options for one forward pass. Train mode draws a dropout mask from `rng`
/// unless `frozen_mask` supplies one (used for gradient checks).
struct ForwardOptions {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;
  const Vector* frozen_mask = nullptr;
};

namespace detail {

inline Vector affine(const DenseLayer& l, std::span<const double> x) {
  Vector z(l.out());
  for (std::size_t r = 0; r < l.out(); ++r) z[r] = l.b[r] + dot(l.W.row(r), x);
  return z;
}

inline Vector head_forward(const ClassifierHead& h, Vector input, const ForwardOptions& opt, HeadCache& cache) {
  if (input.size() != h.input_size()) {
    throw InputError("forward: input has size " + std::to_string(input.size()) + ", model expects " +
                     std::to_string(h.input_size()));
  }
  cache.input = std::move(input);
  Vector act;
  if (h.hidden) {
    cache.hidden_pre = affine(*h.hidden, cache.input);
    act = cache.hidden_pre;
    for (double& v : act) v = std::max(v, 0.0);
  } else {
    act = cache.input;
  }
  if (opt.mode == Mode::train) {
    if (opt.frozen_mask) {
      if (opt.frozen_mask->size() != act.size()) throw InputError("forward: frozen dropout mask has the wrong size");
      cache.mask = *opt.frozen_mask;
    } else {
      if (h.dropout > 0.0 && !opt.rng) throw InputError("forward: train mode needs a dropout stream");
      Rng dummy(0);
      cache.mask = dropout_mask(act.size(), h.dropout, opt.rng ? *opt.rng : dummy);
    }
    for (std::size_t i = 0; i < act.size(); ++i) act[i] *= cache.mask[i];
  }
  cache.dropped = std::move(act);
  return affine(h.output, cache.dropped);
}

// Writes head gradients into grads[offset..]; returns d loss / d input.
inline Vector head_backward(const ClassifierHead& h, const HeadCache& cache, std::span<const double> grad_logits,
                            Gradients& grads, std::size_t offset) {
  const bool has_hidden = h.hidden.has_value();
  Vector& gWo = grads[offset + (has_hidden ? 2 : 0)];
  Vector& gbo = grads[offset + (has_hidden ? 3 : 1)];
  const DenseLayer& out = h.output;
  Vector g_dropped(out.in(), 0.0);
  for (std::size_t r = 0; r < out.out(); ++r) {
    const double g = grad_logits[r];
    gbo[r] += g;
    if (g == 0.0) continue;
    double* gw = gWo.data() + r * out.in();
    const auto wrow = out.W.row(r);
    for (std::size_t c = 0; c < out.in(); ++c) {
      gw[c] += g * cache.dropped[c];
      g_dropped[c] += g * wrow[c];
    }
  }
  if (!cache.mask.empty()) {
    for (std::size_t i = 0; i < g_dropped.size(); ++i) g_dropped[i] *= cache.mask[i];
  }
  if (!has_hidden) return g_dropped;

  const DenseLayer& hid = *h.hidden;
  Vector& gWh = grads[offset];
  Vector& gbh = grads[offset + 1];
  Vector g_input(hid.in(), 0.0);
  for (std::size_t r = 0; r < hid.out(); ++r) {
    const double g = cache.hidden_pre[r] > 0.0 ? g_dropped[r] : 0.0;
    gbh[r] += g;
    if (g == 0.0) continue;
    double* gw = gWh.data() + r * hid.in();
    const auto wrow = hid.W.row(r);
    for (std::size_t c = 0; c < hid.in(); ++c) {
      gw[c] += g * cache.input[c];
      g_input[c] += g * wrow[c];
    }
  }
  return g_input;
}

template <typename Model>
void check_cache(const Model& m, const ForwardCache& cache) {
  if (cache.owner != static_cast<const void*>(&m) || cache.version != m.version) {
    throw Error("backward: cache does not belong to the current model state");
  }
}

}  // namespace detail

/// Convolution over the first `tokens.length` rows, ReLU and global max-pool.
/// Output order: width 1 maps, then width 2 maps, and so on. A filter wider
/// than the sequence emits ReLU(bias).
inline Vector conv_forward(const ConvBank& bank, const TokenMatrix& tokens, ConvCache* cache = nullptr) {
  if (tokens.length == 0 || tokens.length > tokens.rows.size()) {
    throw InputError("conv_forward: token matrix must have 1..rows valid tokens");
  }
  if (tokens.dim() != bank.dim) {
    throw InputError("conv_forward: token dim " + std::to_string(tokens.dim()) + " does not match filter dim " +
                     std::to_string(bank.dim));
  }
  const std::size_t L = tokens.length;
  const std::size_t d = bank.dim;
  Vector out(bank.output_size(), 0.0);
  if (cache) {
    cache->length = L;
    cache->argmax.assign(out.size(), -1);
    cache->active.assign(out.size(), 0);
    cache->tokens = &tokens;
  }
  std::size_t unit = 0;
  for (const auto& grp : bank.groups) {
    const std::size_t k = grp.width;
    for (std::size_t m = 0; m < bank.maps; ++m, ++unit) {
      const auto w = grp.W.row(m);
      double best = grp.b[m];
      long best_pos = -1;
      if (L >= k) {
        best = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p + k <= L; ++p) {
          double s = grp.b[m];
          for (std::size_t r = 0; r < k; ++r) s += dot(w.subspan(r * d, d), tokens.rows[p + r]);
          if (s > best) {
            best = s;
            best_pos = static_cast<long>(p);
          }
        }
      }
      out[unit] = std::max(best, 0.0);
      if (cache) {
        cache->argmax[unit] = best_pos;
        cache->active[unit] = best > 0.0;
      }
    }
  }
  return out;
}

/// Accumulates conv parameter gradients (blocks 0..9 of a CnnHeadModel).
inline void conv_backward(const ConvBank& bank, const ConvCache& cache, std::span<const double> grad_out,
                          Gradients& grads) {
  const std::size_t d = bank.dim;
  std::size_t unit = 0;
  for (std::size_t g = 0; g < bank.groups.size(); ++g) {
    const auto& grp = bank.groups[g];
    Vector& gW = grads[2 * g];
    Vector& gb = grads[2 * g + 1];
    for (std::size_t m = 0; m < bank.maps; ++m, ++unit) {
      if (!cache.active[unit]) continue;
      const double go = grad_out[unit];
      gb[m] += go;
      if (cache.argmax[unit] < 0) continue;
      const auto p = static_cast<std::size_t>(cache.argmax[unit]);
      double* gw = gW.data() + m * grp.W.cols;
      for (std::size_t r = 0; r < grp.width; ++r) {
        const auto& x = cache.tokens->rows[p + r];
        for (std::size_t j = 0; j < d; ++j) gw[r * d + j] += go * x[j];
      }
    }
  }
}

inline ForwardResult forward(const FfnHeadModel& m, std::span<const double> input, const ForwardOptions& opt = {}) {
  ForwardResult r;
  r.cache.owner = &m;
  r.cache.version = m.version;
  r.cache.mode = opt.mode;
  r.logits = detail::head_forward(m.head, Vector(input.begin(), input.end()), opt, r.cache.head);
  return r;
}

inline ForwardResult forward(const FfnEeFusionModel& m, std::span<const double> input,
                             const ForwardOptions& opt = {}) {
  ForwardResult r;
  r.cache.owner = &m;
  r.cache.version = m.version;
  r.cache.mode = opt.mode;
  r.logits = detail::head_forward(m.head, Vector(input.begin(), input.end()), opt, r.cache.head);
  return r;
}

/// `tokens` must outlive the returned cache.
inline ForwardResult forward(const CnnHeadModel& m, const TokenMatrix& tokens, const ForwardOptions& opt = {}) {
  ForwardResult r;
  r.cache.owner = &m;
  r.cache.version = m.version;
  r.cache.mode = opt.mode;
  r.cache.conv.emplace();
  Vector pooled = conv_forward(m.conv, tokens, &*r.cache.conv);
  r.logits = detail::head_forward(m.head, std::move(pooled), opt, r.cache.head);
  return r;
}

inline Gradients backward(FfnHeadModel& m, const ForwardCache& cache, std::span<const double> grad_logits) {
  detail::check_cache(m, cache);
  Gradients g = zero_gradients(m);
  detail::head_backward(m.head, cache.head, grad_logits, g, 0);
  return g;
}

inline Gradients backward(FfnEeFusionModel& m, const ForwardCache& cache, std::span<const double> grad_logits) {
  detail::check_cache(m, cache);
  Gradients g = zero_gradients(m);
  detail::head_backward(m.head, cache.head, grad_logits, g, 0);
  return g;
}

inline Gradients backward(CnnHeadModel& m, const ForwardCache& cache, std::span<const double> grad_logits) {
  detail::check_cache(m, cache);
  if (!cache.conv) throw Error("backward: cache lacks convolution state");
  Gradients g = zero_gradients(m);
  const Vector g_pooled = detail::head_backward(m.head, cache.head, grad_logits, g, 2 * kConvWidths.size());
  conv_backward(m.conv, *cache.conv, g_pooled, g);
  return g;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy

inline Vector softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

inline double cross_entropy(std::span<const double> logits, std::size_t target) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return std::log(s) + mx - logits[target];
}

/// d cross_entropy / d logits = softmax - onehot(target).
inline Vector cross_entropy_grad(std::span<const double> logits, std::size_t target) {
  Vector g = softmax(logits);
  g[target] -= 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// EE fusion input

/// [article | cos(article, def_c) for c in catalog order], optionally followed
/// by the mean label-definition vector.
inline Vector build_ee_fusion_input(std::span<const double> article_vec, const EmbeddingStore& label_store,
                                    const LabelCatalog& catalog,
                                    FusionInputMode mode = FusionInputMode::similarities) {
  if (label_store.dim() != article_vec.size()) {
    throw InputError("fusion input: article dim " + std::to_string(article_vec.size()) +
                     " differs from label store dim " + std::to_string(label_store.dim()));
  }
  Vector out(article_vec.begin(), article_vec.end());
  Vector mean(article_vec.size(), 0.0);
  for (const auto& e : catalog.entries()) {
    if (!label_store.contains(e.id)) throw InputError("fusion input: missing label vector for '" + e.id + "'");
    const auto& def = label_store.vector(e.id);
    out.push_back(cosine_similarity(article_vec, def));
    for (std::size_t i = 0; i < def.size(); ++i) mean[i] += def[i] / static_cast<double>(catalog.size());
  }
  if (mode == FusionInputMode::concat_definitions) out.insert(out.end(), mean.begin(), mean.end());
  return out;
}

inline std::size_t fusion_input_size(std::size_t dim, std::size_t labels, FusionInputMode mode) {
  return dim + labels + (mode == FusionInputMode::concat_definitions ? dim : 0);
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  std::vector<double> loss_curve;  // eval-mode mean training loss after each epoch
};

namespace detail {

template <typename Model, typename Input>
double mean_loss(const Model& m, std::span<const Input> inputs, std::span<const std::size_t> targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto r = forward(m, inputs[i], {Mode::eval});
    total += cross_entropy(r.logits, targets[i]);
  }
  return total / static_cast<double>(inputs.size());
}

}  // namespace detail

/// Mini-batch SGD with momentum on mean softmax cross-entropy.
///
/// `targets` are output indices. Example order is reshuffled every epoch
/// from `model.config.seed`; dropout draws from a second stream, so a run is
/// fully determined by the seed.
template <typename Model, typename Input>
TrainResult train_classifier(Model& model, std::span<const Input> inputs, std::span<const std::size_t> targets) {
  const TrainConfig& cfg = model.config;
  if (inputs.size() != targets.size()) throw InputError("train: inputs and targets differ in length");
  if (inputs.empty()) throw InputError("train: no training examples");
  {
    std::vector<std::size_t> distinct(targets.begin(), targets.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw InputError("train: need at least two distinct target labels");
    if (distinct.back() >= model.head.width()) throw InputError("train: target index outside the output layer");
  }
  if (cfg.batch_size == 0) throw InputError("train: batch size must be positive");

  Rng order_rng(splitmix64(cfg.seed ^ 0x5EEDULL));
  Rng dropout_rng(splitmix64(cfg.seed ^ 0xD207ULL));
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto blocks = parameter_blocks(model);
  Gradients velocity;
  for (auto blk : blocks) velocity.emplace_back(blk.size(), 0.0);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Gradients acc = zero_gradients(model);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const auto fr = forward(model, inputs[i], {Mode::train, &dropout_rng});
        batch_loss += cross_entropy(fr.logits, targets[i]);
        const Gradients g = backward(model, fr.cache, cross_entropy_grad(fr.logits, targets[i]));
        for (std::size_t b = 0; b < g.size(); ++b) {
          for (std::size_t j = 0; j < g[b].size(); ++j) acc[b][j] += g[b][j];
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("train: loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t j = 0; j < blocks[b].size(); ++j) {
          velocity[b][j] = cfg.momentum * velocity[b][j] - cfg.learning_rate * scale * acc[b][j];
          blocks[b][j] += velocity[b][j];
        }
      }
      ++model.version;
    }
    const double loss = detail::mean_loss(model, inputs, targets);
    if (!std::isfinite(loss)) {
      throw DivergenceError("train: loss became non-finite after epoch " + std::to_string(epoch + 1));
    }
    result.loss_curve.push_back(loss);
  }
  return result;
}

/// Post-pool, pre-classifier features of a trained CNN (eval mode).
inline Vector extract_cnn_representation(const CnnHeadModel& m, const TokenMatrix& tokens) {
  return conv_forward(m.conv, tokens);
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline json dense_to_json(const DenseLayer& l) {
  return {{"in", l.in()},
          {"out", l.out()},
          {"activation", l.activation == Activation::relu ? "relu" : "identity"},
          {"W", l.W.data},
          {"b", l.b}};
}

inline DenseLayer dense_from_json(const json& j) {
  DenseLayer l;
  l.W = Matrix(j.at("out").get<std::size_t>(), j.at("in").get<std::size_t>());
  l.W.data = j.at("W").get<std::vector<double>>();
  l.b = j.at("b").get<Vector>();
  l.activation = j.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::identity;
  if (l.W.data.size() != l.W.rows * l.W.cols || l.b.size() != l.W.rows) {
    throw InputError("dense layer: parameter shapes do not match the declared sizes");
  }
  return l;
}

inline json head_to_json(const ClassifierHead& h) {
  json j;
  j["hidden"] = h.hidden ? dense_to_json(*h.hidden) : json(nullptr);
  j["output"] = dense_to_json(h.output);
  j["dropout"] = h.dropout;
  return j;
}

inline ClassifierHead head_from_json(const json& j) {
  ClassifierHead h;
  if (!j.at("hidden").is_null()) h.hidden = dense_from_json(j["hidden"]);
  h.output = dense_from_json(j.at("output"));
  h.dropout = j.at("dropout").get<double>();
  return h;
}

}  // namespace detail

inline json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"momentum", c.momentum}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"seed", c.seed},         {"hidden", c.hidden},
          {"dropout", c.dropout},             {"feature_maps", c.feature_maps}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.hidden = j.value("hidden", c.hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.feature_maps = j.value("feature_maps", c.feature_maps);
  return c;
}

inline json to_json(const FfnHeadModel& m) {
  return {{"head", detail::head_to_json(m.head)}, {"config", train_config_to_json(m.config)}, {"seed", m.config.seed}};
}

inline json to_json(const FfnEeFusionModel& m) {
  return {{"head", detail::head_to_json(m.head)},
          {"fusion", m.fusion == FusionInputMode::similarities ? "similarities" : "concat-defs"},
          {"config", train_config_to_json(m.config)},
          {"seed", m.config.seed}};
}

inline json to_json(const CnnHeadModel& m) {
  json groups = json::array();
  for (const auto& g : m.conv.groups) {
    groups.push_back({{"width", g.width}, {"W", g.W.data}, {"b", g.b}});
  }
  return {{"conv", {{"dim", m.conv.dim}, {"maps", m.conv.maps}, {"groups", groups}}},
          {"head", detail::head_to_json(m.head)},
          {"config", train_config_to_json(m.config)},
          {"seed", m.config.seed}};
}

inline FfnHeadModel ffn_from_json(const json& j) {
  try {
    return {detail::head_from_json(j.at("head")), train_config_from_json(j.at("config")), 0};
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed ffn model: ") + e.what());
  }
}

inline FfnEeFusionModel ffn_ee_from_json(const json& j) {
  try {
    FfnEeFusionModel m;
    m.head = detail::head_from_json(j.at("head"));
    m.fusion = j.at("fusion").get<std::string>() == "concat-defs" ? FusionInputMode::concat_definitions
                                                                  : FusionInputMode::similarities;
    m.config = train_config_from_json(j.at("config"));
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed ffn-ee model: ") + e.what());
  }
}

inline CnnHeadModel cnn_from_json(const json& j) {
  try {
    CnnHeadModel m;
    const auto& c = j.at("conv");
    m.conv.dim = c.at("dim").get<std::size_t>();
    m.conv.maps = c.at("maps").get<std::size_t>();
    const auto& groups = c.at("groups");
    if (groups.size() != kConvWidths.size()) throw InputError("cnn model: expected five convolution widths");
    for (std::size_t g = 0; g < kConvWidths.size(); ++g) {
      auto& grp = m.conv.groups[g];
      grp.width = groups[g].at("width").get<std::size_t>();
      grp.W = Matrix(m.conv.maps, grp.width * m.conv.dim);
      grp.W.data = groups[g].at("W").get<std::vector<double>>();
      grp.b = groups[g].at("b").get<Vector>();
      if (grp.W.data.size() != grp.W.rows * grp.W.cols || grp.b.size() != m.conv.maps) {
        throw InputError("cnn model: convolution parameter shapes do not match");
      }
    }
    m.head = detail::head_from_json(j.at("head"));
    m.config = train_config_from_json(j.at("config"));
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed cnn model: ") + e.what());
  }
}

}  // namespace esgclf
