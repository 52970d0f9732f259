#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "smia/cost.hpp"
#include "smia/signals.hpp"
#include "smia/train.hpp"

namespace smia::pipeline {

enum class ClientKind { stub, bridge_files };

using Entries = std::map<std::string, std::string, std::less<>>;

// Plain "key = value" lines; '#' starts a comment. Unknown keys are rejected
// when the entries are turned into a PipelineConfig.
Entries parse_config_text(std::string_view text, std::string_view origin = "config");
Entries parse_config_file(const std::filesystem::path& path);

struct PipelineConfig {
  std::filesystem::path work_dir = ".";

  // File names, resolved against work_dir.
  std::string raw_texts = "raw_texts.jsonl";
  std::string texts = "texts.jsonl";
  std::string masks = "masks.jsonl";
  std::string fill_responses = "fill_responses.jsonl";
  std::string neighbors = "neighbors.jsonl";
  std::string embeddings = "embeddings.jsonl";
  std::string logprobs = "logprobs.jsonl";
  std::string ref_logprobs = "logprobs_ref.jsonl";
  std::string scores = "scores.jsonl";
  std::string features_prefix = "features";  // features_<split>.jsonl
  std::string model = "model.bin";
  std::string train_log = "train_log.jsonl";
  std::string smia_scores = "smia_scores.jsonl";
  std::string report = "report.json";
  std::string roc = "roc.csv";
  std::string modified_texts = "texts_modified.jsonl";
  std::string cost_report = "cost.json";

  std::size_t min_words = 130;
  std::size_t max_words = 150;
  std::size_t n = 25;
  std::size_t k = 0;  // 0 selects ceil(10% of the words)
  std::size_t n_inf = 25;
  std::vector<double> k_percent = {10.0, 20.0};
  std::vector<signals::Attack> attacks = {std::begin(signals::kAllAttacks), std::end(signals::kAllAttacks)};
  double epsilon = 0.5;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 1024;
  std::size_t max_in_flight = 1;

  nn::TrainConfig train;

  ClientKind fill_client = ClientKind::stub;
  ClientKind embed_client = ClientKind::stub;
  ClientKind logprob_client = ClientKind::stub;
  double stub_bigram_weight = 0.9;

  std::string modify_kind = "duplication";

  CostModel cost{6000, 25, 0, 0, 0, 1052, 1e-7};
  ItemCountRule cost_rule = ItemCountRule::worked_example;

  static PipelineConfig from_entries(const Entries& entries);
  // Every setting as canonical text; from_entries(to_entries()) round-trips.
  Entries to_entries() const;
  // SHA-256 of the canonical "key=value\n" rendering.
  std::string digest() const;

  std::filesystem::path path(std::string_view file) const { return work_dir / std::string(file); }
  std::filesystem::path features_path(std::string_view split) const;
  bool wants(signals::Attack a) const;
};

}  // namespace smia::pipeline
