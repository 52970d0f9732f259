#include "smia/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "smia/error.hpp"
#include "smia/jsonl.hpp"
#include "smia/simd/kernels.hpp"

namespace smia::nn {

std::vector<OriginalGroup> group_by_original(std::vector<FeatureRow> rows) {
  std::vector<OriginalGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (auto& r : rows) {
    auto [it, inserted] = index.emplace(r.orig_id, groups.size());
    if (inserted) groups.push_back({r.orig_id, r.label, {}});
    auto& g = groups[it->second];
    if (g.label != r.label) fail(ErrorKind::invalid_input, "rows of " + r.orig_id + " carry both labels");
    g.rows.push_back(std::move(r));
  }
  for (auto& g : groups) {
    std::stable_sort(g.rows.begin(), g.rows.end(),
                     [](const FeatureRow& a, const FeatureRow& b) { return a.neighbor_index < b.neighbor_index; });
  }
  return groups;
}

namespace {

void check_pool(std::span<const OriginalGroup> pool, int label, const TrainConfig& cfg, std::size_t d,
                const char* name) {
  if (pool.size() < cfg.batch_originals / 2) {
    fail(ErrorKind::invalid_input, std::string("mlp_train: ") + name + " pool has " + std::to_string(pool.size()) +
                                       " originals, need at least " + std::to_string(cfg.batch_originals / 2));
  }
  for (const auto& g : pool) {
    if (g.label != label) fail(ErrorKind::invalid_input, "mlp_train: " + g.orig_id + " is in the wrong pool");
    if (g.rows.size() != cfg.neighbors_per_original) {
      fail(ErrorKind::invalid_input, "mlp_train: " + g.orig_id + " has " + std::to_string(g.rows.size()) +
                                         " rows, expected " + std::to_string(cfg.neighbors_per_original));
    }
    for (const auto& r : g.rows) {
      if (r.emb_delta.size() != d) fail(ErrorKind::invalid_input, "mlp_train: mixed embedding dimensions");
      if (r.label != label) fail(ErrorKind::invalid_input, "mlp_train: row label disagrees with pool");
    }
  }
}

}  // namespace

TrainResult mlp_train(std::span<const OriginalGroup> members, std::span<const OriginalGroup> nonmembers,
                      std::span<const FeatureRow> validation, const TrainConfig& cfg, const StepObserver& observer) {
  if (cfg.batch_originals < 2 || cfg.batch_originals % 2 != 0)
    fail(ErrorKind::config, "batch size must be a positive even number of originals");
  if (cfg.epochs < 1) fail(ErrorKind::config, "epochs must be at least 1");
  if (!(cfg.learning_rate > 0.0)) fail(ErrorKind::config, "learning rate must be positive");
  if (cfg.neighbors_per_original == 0) fail(ErrorKind::config, "neighbors per original must be positive");
  if (members.empty() || nonmembers.empty()) fail(ErrorKind::invalid_input, "mlp_train: empty training pool");
  if (validation.empty()) fail(ErrorKind::invalid_input, "mlp_train: empty validation set");
  const std::size_t d = members.front().rows.empty() ? 0 : members.front().rows.front().emb_delta.size();
  check_pool(members, 1, cfg, d, "member");
  check_pool(nonmembers, 0, cfg, d, "nonmember");
  for (const auto& r : validation)
    if (r.emb_delta.size() != d) fail(ErrorKind::invalid_input, "mlp_train: validation dimension mismatch");

  const std::size_t half = cfg.batch_originals / 2;
  TrainResult result;
  SmiaModel model = SmiaModel::initialize(d, cfg.seed, cfg.dropout);
  SmiaModel best = model;
  double best_val = std::numeric_limits<double>::infinity();

  ParameterSet grads = ParameterSet::zeros_like(model);
  ParameterSet m1 = ParameterSet::zeros_like(model);
  ParameterSet m2 = ParameterSet::zeros_like(model);
  BatchEngine engine(model);
  const auto& kernels = simd::kernels();

  std::vector<std::size_t> member_order(members.size()), nonmember_order(nonmembers.size());
  std::vector<const FeatureRow*> batch;
  long adam_step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(member_order.begin(), member_order.end(), std::size_t{0});
    std::iota(nonmember_order.begin(), nonmember_order.end(), std::size_t{0});
    SplitMix64 member_rng(derive_seed(cfg.seed, "members/" + std::to_string(epoch)));
    SplitMix64 nonmember_rng(derive_seed(cfg.seed, "nonmembers/" + std::to_string(epoch)));
    shuffle(member_order, member_rng);
    shuffle(nonmember_order, nonmember_rng);

    const std::size_t steps = std::min(members.size() / half, nonmembers.size() / half);
    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      StepRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      batch.clear();
      for (std::size_t i = 0; i < half; ++i) {
        const auto& g = members[member_order[step * half + i]];
        rec.member_ids.push_back(g.orig_id);
        for (const auto& r : g.rows) batch.push_back(&r);
      }
      for (std::size_t i = 0; i < half; ++i) {
        const auto& g = nonmembers[nonmember_order[step * half + i]];
        rec.nonmember_ids.push_back(g.orig_id);
        for (const auto& r : g.rows) batch.push_back(&r);
      }
      rec.rows = batch.size();
      if (rec.member_ids.size() != half || rec.nonmember_ids.size() != half ||
          rec.rows != cfg.batch_originals * cfg.neighbors_per_original) {
        fail(ErrorKind::invalid_input, "mlp_train: unbalanced batch at epoch " + std::to_string(epoch));
      }

      SplitMix64 dropout_rng(derive_seed(cfg.seed, "dropout/" + std::to_string(epoch) + "/" + std::to_string(step)));
      grads.zero();
      rec.loss = engine.run(batch, Mode::train, &dropout_rng, &grads);
      if (!std::isfinite(rec.loss)) {
        fail(ErrorKind::numeric, "non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                     std::to_string(step) + " (learning rate " +
                                     jsonl::format_number(cfg.learning_rate, 6) + ")");
      }
      ++adam_step;
      const simd::AdamParams ap{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, adam_step};
      auto& layers = model.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        kernels.adam(layers[l].weight.data(), grads.layers[l].weight.data(), m1.layers[l].weight.data(),
                     m2.layers[l].weight.data(), layers[l].weight.size(), ap);
        kernels.adam(layers[l].bias.data(), grads.layers[l].bias.data(), m1.layers[l].bias.data(),
                     m2.layers[l].bias.data(), layers[l].bias.size(), ap);
      }
      epoch_loss += rec.loss;
      if (observer) observer(rec);
      result.steps.push_back(std::move(rec));
    }

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = steps ? epoch_loss / static_cast<double>(steps) : 0.0;
    er.validation_loss = mean_bce(model, validation);
    if (!std::isfinite(er.validation_loss)) {
      fail(ErrorKind::numeric, "non-finite validation loss after epoch " + std::to_string(epoch) +
                                   " (learning rate " + jsonl::format_number(cfg.learning_rate, 6) + ")");
    }
    result.history.push_back(er);
    if (er.validation_loss < best_val) {
      best_val = er.validation_loss;
      best = model;
      best.epoch_of_best_validation = epoch;
    }
  }

  best.history = result.history;
  best.seed = cfg.seed;
  result.model = std::move(best);
  return result;
}

}  // namespace smia::nn
