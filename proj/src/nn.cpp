#include "smia/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smia/error.hpp"
#include "smia/jsonl.hpp"
#include "smia/simd/kernels.hpp"

namespace smia::nn {

std::vector<FeatureRow> build_feature_rows(const embed::EmbeddingVector& orig_emb,
                                           std::span<const embed::EmbeddingVector> neigh_embs, double orig_loss,
                                           std::span<const double> neigh_losses, int label) {
  if (neigh_embs.empty()) fail(ErrorKind::invalid_input, "build_feature_rows: no neighbors for " + orig_emb.id);
  if (neigh_embs.size() != neigh_losses.size()) {
    fail(ErrorKind::invalid_input, "build_feature_rows: " + std::to_string(neigh_embs.size()) + " embeddings but " +
                                       std::to_string(neigh_losses.size()) + " losses for " + orig_emb.id);
  }
  if (label != 0 && label != 1) fail(ErrorKind::invalid_input, "build_feature_rows: label must be 0 or 1");
  const std::size_t d = orig_emb.values.size();
  std::vector<FeatureRow> rows;
  rows.reserve(neigh_embs.size());
  for (std::size_t i = 0; i < neigh_embs.size(); ++i) {
    const auto& n = neigh_embs[i].values;
    if (n.size() != d) {
      fail(ErrorKind::invalid_input, "build_feature_rows: neighbor " + std::to_string(i) + " of " + orig_emb.id +
                                         " has dimension " + std::to_string(n.size()) + ", expected " +
                                         std::to_string(d));
    }
    FeatureRow r;
    r.emb_delta.resize(d);
    for (std::size_t j = 0; j < d; ++j) r.emb_delta[j] = orig_emb.values[j] - n[j];
    r.loss_delta = orig_loss - neigh_losses[i];
    r.label = label;
    r.orig_id = orig_emb.id;
    r.neighbor_index = i;
    rows.push_back(std::move(r));
  }
  return rows;
}

SmiaModel::SmiaModel(std::size_t embedding_dim, double dropout) : dropout_rate(dropout) {
  if (embedding_dim == 0) fail(ErrorKind::invalid_input, "embedding dimension must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::config, "dropout rate must be in [0, 1)");
  layers_.emplace_back(1, kBranchWidth);
  layers_.emplace_back(embedding_dim, kBranchWidth);
  for (std::size_t i = 0; i + 1 < kTrunkWidths.size(); ++i) layers_.emplace_back(kTrunkWidths[i], kTrunkWidths[i + 1]);
}

SmiaModel SmiaModel::initialize(std::size_t embedding_dim, std::uint64_t seed, double dropout) {
  SmiaModel m(embedding_dim, dropout);
  m.seed = seed;
  SplitMix64 rng(seed);
  for (auto& layer : m.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (auto& w : layer.weight) w = (2.0 * rng.uniform01() - 1.0) * bound;
    for (auto& b : layer.bias) b = (2.0 * rng.uniform01() - 1.0) * bound;
  }
  return m;
}

std::size_t SmiaModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

ParameterSet ParameterSet::zeros_like(const SmiaModel& model) {
  ParameterSet p;
  for (const auto& l : model.layers()) p.layers.emplace_back(l.in, l.out);
  return p;
}

void ParameterSet::zero() {
  for (auto& l : layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

namespace {

constexpr double kProbLow = std::numeric_limits<double>::min();
constexpr double kProbHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2;

double sigmoid(double z) {
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return p;
}

// BCE(sigmoid(z), y) without forming the probability.
double bce_with_logit(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z))); }

void broadcast_bias(const DenseLayer& layer, std::size_t rows, std::vector<double>& out) {
  out.resize(rows * layer.out);
  for (std::size_t r = 0; r < rows; ++r) std::copy(layer.bias.begin(), layer.bias.end(), out.begin() + r * layer.out);
}

// h = relu(pre) * scale, with scale drawn for training and 1 otherwise.
void activate(const std::vector<double>& pre, std::vector<double>& scale, double* h, Mode mode, double rate,
              SplitMix64* rng) {
  scale.resize(pre.size());
  const double keep = 1.0 / (1.0 - rate);
  if (mode == Mode::train && rate > 0.0) {
    if (!rng) fail(ErrorKind::invalid_input, "train-mode forward pass needs an rng");
    for (auto& s : scale) s = rng->uniform01() < rate ? 0.0 : keep;
  } else {
    std::fill(scale.begin(), scale.end(), 1.0);
  }
  for (std::size_t i = 0; i < pre.size(); ++i) h[i] = pre[i] > 0.0 ? pre[i] * scale[i] : 0.0;
}

// g_pre = g_h * scale * [pre > 0], in place on g.
void relu_dropout_backward(const std::vector<double>& pre, const std::vector<double>& scale, double* g,
                           std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) g[i] = pre[i] > 0.0 ? g[i] * scale[i] : 0.0;
}

void accumulate_bias(const double* g, std::size_t rows, std::size_t out, std::vector<double>& gb) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) gb[o] += g[r * out + o];
}

}  // namespace

double BatchEngine::run(std::span<const FeatureRow* const> rows, Mode mode, SplitMix64* rng, ParameterSet* grads,
                        std::vector<double>* probs) {
  const auto& layers = model_->layers();
  const auto& k = simd::kernels();
  const std::size_t n = rows.size();
  if (n == 0) fail(ErrorKind::invalid_input, "forward pass over zero rows");
  const std::size_t d = model_->embedding_dim();
  const std::size_t bw = SmiaModel::kBranchWidth;
  const double rate = model_->dropout_rate;
  state_.resize(layers.size());

  // Branch inputs.
  auto& s0 = state_[0];
  auto& s1 = state_[1];
  s0.input.resize(n);
  s1.input.resize(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    const FeatureRow& row = *rows[r];
    if (row.emb_delta.size() != d) {
      fail(ErrorKind::invalid_input, "feature row " + row.orig_id + "#" + std::to_string(row.neighbor_index) +
                                         " has embedding dimension " + std::to_string(row.emb_delta.size()) +
                                         ", model expects " + std::to_string(d));
    }
    s0.input[r] = row.loss_delta;
    std::copy(row.emb_delta.begin(), row.emb_delta.end(), s1.input.begin() + r * d);
  }

  // Loss branch: K = 1, done directly.
  broadcast_bias(layers[0], n, s0.pre);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < bw; ++o) s0.pre[r * bw + o] += layers[0].weight[o] * s0.input[r];
  broadcast_bias(layers[1], n, s1.pre);
  k.gemm_nt(n, bw, d, s1.input.data(), layers[1].weight.data(), s1.pre.data());

  // Concatenated [loss | embedding] activations feed the trunk.
  auto& trunk_in = state_[2].input;
  trunk_in.resize(n * 2 * bw);
  {
    std::vector<double> h(n * bw);
    activate(s0.pre, s0.scale, h.data(), mode, rate, rng);
    for (std::size_t r = 0; r < n; ++r) std::copy_n(h.begin() + r * bw, bw, trunk_in.begin() + r * 2 * bw);
    activate(s1.pre, s1.scale, h.data(), mode, rate, rng);
    for (std::size_t r = 0; r < n; ++r) std::copy_n(h.begin() + r * bw, bw, trunk_in.begin() + r * 2 * bw + bw);
  }

  const std::size_t last = layers.size() - 1;
  for (std::size_t l = 2; l <= last; ++l) {
    auto& s = state_[l];
    const auto& layer = layers[l];
    broadcast_bias(layer, n, s.pre);
    k.gemm_nt(n, layer.out, layer.in, s.input.data(), layer.weight.data(), s.pre.data());
    if (l < last) {
      auto& next = state_[l + 1].input;
      next.resize(n * layer.out);
      activate(s.pre, s.scale, next.data(), mode, rate, rng);
    }
  }
  logits_ = state_[last].pre;

  double loss = 0.0;
  if (probs) probs->resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double z = logits_[r];
    const double y = rows[r]->label;
    loss += bce_with_logit(z, y);
    if (probs) (*probs)[r] = std::clamp(sigmoid(z), kProbLow, kProbHigh);
  }
  loss /= static_cast<double>(n);
  if (!grads) return loss;

  // Backward.
  auto& g = grads->layers;
  grad_a_.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) grad_a_[r] = (sigmoid(logits_[r]) - rows[r]->label) / static_cast<double>(n);

  for (std::size_t l = last; l >= 2; --l) {
    const auto& layer = layers[l];
    auto& s = state_[l];
    if (l < last) relu_dropout_backward(s.pre, s.scale, grad_a_.data(), n * layer.out);
    k.gemm_tn(layer.out, layer.in, n, grad_a_.data(), s.input.data(), g[l].weight.data());
    accumulate_bias(grad_a_.data(), n, layer.out, g[l].bias);
    grad_b_.assign(n * layer.in, 0.0);
    k.gemm_nn(n, layer.in, layer.out, grad_a_.data(), layer.weight.data(), grad_b_.data());
    std::swap(grad_a_, grad_b_);
  }

  // grad_a_ now holds d(loss)/d(trunk input), n x 1024.
  std::vector<double> gb(n * bw);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(grad_a_.begin() + r * 2 * bw, bw, gb.begin() + r * bw);
  relu_dropout_backward(s0.pre, s0.scale, gb.data(), n * bw);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < bw; ++o) g[0].weight[o] += gb[r * bw + o] * s0.input[r];
  accumulate_bias(gb.data(), n, bw, g[0].bias);

  for (std::size_t r = 0; r < n; ++r) std::copy_n(grad_a_.begin() + r * 2 * bw + bw, bw, gb.begin() + r * bw);
  relu_dropout_backward(s1.pre, s1.scale, gb.data(), n * bw);
  k.gemm_tn(bw, d, n, gb.data(), s1.input.data(), g[1].weight.data());
  accumulate_bias(gb.data(), n, bw, g[1].bias);
  return loss;
}

double mlp_forward(const SmiaModel& model, const FeatureRow& row, Mode mode, SplitMix64* rng) {
  BatchEngine engine(model);
  const FeatureRow* p = &row;
  std::vector<double> probs;
  engine.run(std::span<const FeatureRow* const>(&p, 1), mode, rng, nullptr, &probs);
  return probs.front();
}

namespace {

constexpr std::size_t kEvalChunk = 256;

template <typename F>
void for_each_chunk(std::span<const FeatureRow> rows, F&& fn) {
  std::vector<const FeatureRow*> ptrs;
  for (std::size_t b = 0; b < rows.size(); b += kEvalChunk) {
    const std::size_t e = std::min(rows.size(), b + kEvalChunk);
    ptrs.clear();
    for (std::size_t i = b; i < e; ++i) ptrs.push_back(&rows[i]);
    fn(std::span<const FeatureRow* const>(ptrs), b);
  }
}

}  // namespace

std::vector<double> predict(const SmiaModel& model, std::span<const FeatureRow> rows) {
  std::vector<double> out(rows.size());
  BatchEngine engine(model);
  std::vector<double> probs;
  for_each_chunk(rows, [&](std::span<const FeatureRow* const> chunk, std::size_t offset) {
    engine.run(chunk, Mode::eval, nullptr, nullptr, &probs);
    std::copy(probs.begin(), probs.end(), out.begin() + offset);
  });
  return out;
}

double mean_bce(const SmiaModel& model, std::span<const FeatureRow> rows) {
  if (rows.empty()) fail(ErrorKind::invalid_input, "mean_bce over zero rows");
  BatchEngine engine(model);
  double total = 0.0;
  for_each_chunk(rows, [&](std::span<const FeatureRow* const> chunk, std::size_t) {
    total += engine.run(chunk, Mode::eval, nullptr, nullptr) * static_cast<double>(chunk.size());
  });
  return total / static_cast<double>(rows.size());
}

double smia_score(const SmiaModel& model, std::span<const FeatureRow> rows) {
  if (rows.empty()) fail(ErrorKind::invalid_input, "smia_score: no feature rows");
  auto p = predict(model, rows);
  std::sort(p.begin(), p.end());
  double s = 0.0;
  for (double x : p) s += x;
  return s / static_cast<double>(p.size());
}

bool classify(double mu, double epsilon) { return mu > epsilon; }

void save_features(const std::filesystem::path& path, std::span<const FeatureRow> rows) {
  jsonl::Writer out(path);
  for (const auto& r : rows) {
    out.write_raw("{\"orig_id\":" + jsonl::quote(r.orig_id) + ",\"neighbor_index\":" +
                  std::to_string(r.neighbor_index) + ",\"emb_delta\":" + jsonl::format_array(r.emb_delta) +
                  ",\"loss_delta\":" + jsonl::format_number(r.loss_delta) + ",\"label\":" + std::to_string(r.label) +
                  "}");
  }
  out.close();
}

std::vector<FeatureRow> load_features(const std::filesystem::path& path) {
  std::vector<FeatureRow> rows;
  std::size_t d = 0;
  jsonl::for_each_line(path, [&](const jsonl::Json& j, const jsonl::Where& w) {
    FeatureRow r;
    r.orig_id = jsonl::get_string(j, "orig_id", w);
    const auto idx = jsonl::get_int(j, "neighbor_index", w);
    if (idx < 0) fail(ErrorKind::schema, w.str() + ": negative neighbor_index");
    r.neighbor_index = static_cast<std::size_t>(idx);
    r.emb_delta = jsonl::get_numbers(j, "emb_delta", w);
    r.loss_delta = jsonl::get_number(j, "loss_delta", w);
    const auto label = jsonl::get_int(j, "label", w);
    if (label != 0 && label != 1) fail(ErrorKind::schema, w.str() + ": label must be 0 or 1");
    r.label = static_cast<int>(label);
    if (d == 0) d = r.emb_delta.size();
    if (r.emb_delta.size() != d || d == 0) fail(ErrorKind::schema, w.str() + ": inconsistent emb_delta dimension");
    rows.push_back(std::move(r));
  });
  return rows;
}

}  // namespace smia::nn
