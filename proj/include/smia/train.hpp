#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smia/nn.hpp"

namespace smia::nn {

struct TrainConfig {
  int epochs = 20;
  double learning_rate = 5e-6;  // 1e-6 for runs on modified members
  std::size_t batch_originals = 4;  // split evenly between members and nonmembers
  std::size_t neighbors_per_original = 25;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout = 0.2;
  std::uint64_t seed = 0;
};

// All feature rows of one original text.
struct OriginalGroup {
  std::string orig_id;
  int label = 0;
  std::vector<FeatureRow> rows;
};

// Groups rows by orig_id in first-appearance order, each group sorted by neighbor_index.
std::vector<OriginalGroup> group_by_original(std::vector<FeatureRow> rows);

struct StepRecord {
  int epoch = 0;
  std::size_t step = 0;
  std::vector<std::string> member_ids;
  std::vector<std::string> nonmember_ids;
  std::size_t rows = 0;
  double loss = 0.0;
};

struct TrainResult {
  SmiaModel model;  // checkpoint with the lowest validation loss
  std::vector<EpochRecord> history;
  std::vector<StepRecord> steps;
};

using StepObserver = std::function<void(const StepRecord&)>;

// Each epoch both pools are reshuffled (independent SplitMix64 streams derived from
// cfg.seed); every step takes batch/2 member and batch/2 nonmember originals,
// expands them to their rows and applies one Adam update on the mean BCE.
// Leftover originals are skipped for that epoch. After each epoch the eval-mode
// mean BCE over all validation rows is recorded.
TrainResult mlp_train(std::span<const OriginalGroup> members, std::span<const OriginalGroup> nonmembers,
                      std::span<const FeatureRow> validation, const TrainConfig& cfg,
                      const StepObserver& observer = {});

}  // namespace smia::nn
