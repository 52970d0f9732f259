#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smia/config.hpp"
#include "smia/corpus.hpp"

namespace smia::pipeline {

enum class Stage {
  prepare,
  mask,
  fill,
  embed,
  logprobs,  // stub target/reference scoring; with bridge-files it only checks the files exist
  logprobs_check,
  score,
  features,
  train,
  infer,
  eval,
  modify,
  cost,
  all,
};

std::string_view stage_name(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

// Stages run by `all`, in order.
const std::vector<Stage>& pipeline_order();

struct StageResult {
  Stage stage = Stage::all;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::size_t records = 0;  // stage-specific count (rows written, violations found, ...)
  std::string summary;
};

// Runs one stage (or every stage for Stage::all) and writes
// <work_dir>/manifest.<stage>.json after each stage.
std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, Stage stage);

// Manifest: {"stage", "timestamp", "config_hash", "config", "seeds", "isa",
//            "inputs": {file: sha256}, "outputs": {file: sha256}}.
std::filesystem::path manifest_path(const PipelineConfig& cfg, Stage stage);
// Config entries recorded in a manifest, for replay.
Entries load_manifest_config(const std::filesystem::path& manifest);

// A toy corpus of lexicon-word texts for offline runs: labels alternate
// member/nonmember, and each class is split 60/20/20 into train/validation/test.
// Bodies have between min_words and max_words + 20 words (so some get truncated).
std::vector<corpus::TextRecord> synthetic_corpus(std::size_t count, std::uint64_t seed, std::size_t min_words = 130,
                                                 std::size_t max_words = 150);

}  // namespace smia::pipeline
