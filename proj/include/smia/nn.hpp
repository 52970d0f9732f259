#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smia/embed.hpp"
#include "smia/rng.hpp"

namespace smia::nn {

// One neighbor's contribution: (orig_emb - neighbor_emb, orig_loss - neighbor_loss).
struct FeatureRow {
  std::vector<double> emb_delta;
  double loss_delta = 0.0;
  int label = 0;  // 1 member, 0 nonmember
  std::string orig_id;
  std::size_t neighbor_index = 0;
};

std::vector<FeatureRow> build_feature_rows(const embed::EmbeddingVector& orig_emb,
                                           std::span<const embed::EmbeddingVector> neigh_embs, double orig_loss,
                                           std::span<const double> neigh_losses, int label);

// Dense affine map, weight stored row-major [out x in].
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim) : in(in_dim), out(out_dim), weight(in_dim * out_dim), bias(out_dim) {}
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

enum class Mode { train, eval };

// Two input branches (loss delta 1->512, embedding delta d->512), concatenated
// [loss | embedding] into a 1024-wide trunk 1024->512->256->128->64->32->1.
// Hidden layers are affine -> ReLU -> dropout; the last layer is affine -> sigmoid.
class SmiaModel {
 public:
  static constexpr std::size_t kBranchWidth = 512;
  static constexpr std::size_t kReferenceEmbeddingDim = 1024;
  static constexpr std::array<std::size_t, 7> kTrunkWidths = {1024, 512, 256, 128, 64, 32, 1};
  static constexpr std::size_t kLayerCount = 2 + kTrunkWidths.size() - 1;

  SmiaModel() = default;
  // Zero weights and biases.
  explicit SmiaModel(std::size_t embedding_dim, double dropout_rate = 0.2);
  // PyTorch-style fan-in uniform init: U(-1/sqrt(in), 1/sqrt(in)) for weights and
  // biases, layer by layer, weights before biases, from SplitMix64(seed).
  static SmiaModel initialize(std::size_t embedding_dim, std::uint64_t seed, double dropout_rate = 0.2);

  std::size_t embedding_dim() const { return layers_.size() > 1 ? layers_[1].in : 0; }
  bool deviates_from_reference_shape() const { return embedding_dim() != kReferenceEmbeddingDim; }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  double dropout_rate = 0.2;
  std::uint64_t seed = 0;
  int epoch_of_best_validation = 0;
  std::vector<EpochRecord> history;

 private:
  std::vector<DenseLayer> layers_;
};

// Same shapes as the model's layers; used for gradients and optimizer moments.
struct ParameterSet {
  std::vector<DenseLayer> layers;
  static ParameterSet zeros_like(const SmiaModel& model);
  void zero();
};

// Batched forward/backward pass with reusable buffers.
class BatchEngine {
 public:
  explicit BatchEngine(const SmiaModel& model) : model_(&model) {}

  // Mean binary cross-entropy over `rows`. In train mode dropout masks are drawn
  // from `rng` (inverted dropout, keep-scale 1/(1-p)). When `grads` is non-null
  // the gradient of the mean loss is accumulated into it. When `probs` is
  // non-null it receives the per-row output probabilities.
  double run(std::span<const FeatureRow* const> rows, Mode mode, SplitMix64* rng, ParameterSet* grads,
             std::vector<double>* probs = nullptr);

 private:
  struct LayerState {
    std::vector<double> input;  // rows x in (branch inputs included)
    std::vector<double> pre;    // rows x out
    std::vector<double> scale;  // dropout keep-scale, rows x out (hidden layers)
  };
  const SmiaModel* model_;
  std::vector<LayerState> state_;
  std::vector<double> concat_, logits_, grad_a_, grad_b_;
};

// Probability in (0, 1). Dropout applies only in train mode, with masks from `rng`.
double mlp_forward(const SmiaModel& model, const FeatureRow& row, Mode mode, SplitMix64* rng = nullptr);

// Eval-mode outputs for many rows.
std::vector<double> predict(const SmiaModel& model, std::span<const FeatureRow> rows);

// Eval-mode mean BCE over all rows.
double mean_bce(const SmiaModel& model, std::span<const FeatureRow> rows);

// Mean of the per-row eval-mode outputs. Outputs are summed in sorted order, so
// the result does not depend on row order.
double smia_score(const SmiaModel& model, std::span<const FeatureRow> rows);

// member iff mu > epsilon.
bool classify(double mu, double epsilon);

// features.jsonl
void save_features(const std::filesystem::path& path, std::span<const FeatureRow> rows);
std::vector<FeatureRow> load_features(const std::filesystem::path& path);

}  // namespace smia::nn
