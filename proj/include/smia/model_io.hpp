#pragma once

#include <filesystem>

#include "smia/nn.hpp"

namespace smia::nn {

// Checkpoint container, little-endian:
//   8 bytes  magic "SMIAMDL\0"
//   u32      format version (1)
//   u64      header length H
//   H bytes  JSON header: layer shapes, dropout, seed, embedding_dim,
//            embedding_dim_deviation, epoch_of_best_validation, history
//   then for each layer: out*in f64 weights (row-major), out f64 biases.
inline constexpr unsigned kModelFormatVersion = 1;

void save_model(const std::filesystem::path& path, const SmiaModel& model);
SmiaModel load_model(const std::filesystem::path& path);

}  // namespace smia::nn
