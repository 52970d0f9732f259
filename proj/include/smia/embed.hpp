#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smia/parallel.hpp"

namespace smia::embed {

inline constexpr std::size_t kDefaultDimension = 1024;

struct EmbeddingVector {
  std::string id;
  std::vector<double> values;
};

struct EmbeddingDescriptor {
  std::string name;
  std::size_t dimension = kDefaultDimension;
  bool deterministic = false;
};

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  virtual EmbeddingDescriptor descriptor() const = 0;
  // Transport problems are reported as RetryableError.
  virtual std::vector<double> embed(std::string_view id, std::string_view text) = 0;
};

// Hashed bag-of-words: word w goes to bucket h % d with sign -1 when the top bit
// of h is set, h = hash_combine(mix64(seed), fnv1a64(w)); the sum is L2-normalised.
EmbeddingVector stub_embed(std::string_view text, std::size_t d, std::uint64_t seed = 0);

class StubEmbedding final : public EmbeddingClient {
 public:
  explicit StubEmbedding(std::size_t dimension = kDefaultDimension, std::uint64_t seed = 0);
  EmbeddingDescriptor descriptor() const override { return {"stub-hashed-bow", dimension_, true}; }
  std::vector<double> embed(std::string_view id, std::string_view text) override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

// Vectors computed offline by the model bridge, looked up by id.
class ReplayEmbedding final : public EmbeddingClient {
 public:
  explicit ReplayEmbedding(const std::filesystem::path& embeddings);
  EmbeddingDescriptor descriptor() const override { return {"bridge-file", dimension_, true}; }
  std::vector<double> embed(std::string_view id, std::string_view text) override;

 private:
  std::map<std::string, std::vector<double>, std::less<>> vectors_;
  std::size_t dimension_ = 0;
};

// One vector per (id, text), in input order. Each returned vector must have the
// descriptor's dimension and finite entries.
std::vector<EmbeddingVector> embed_texts(std::span<const std::pair<std::string, std::string>> texts,
                                         EmbeddingClient& client, const ParallelOptions& options = {});

// a.b / (|a||b|) clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine(a.values, b.values); }

// Counts over `bins` uniform bins on [0, 1]; values outside are clamped into the
// end bins and 1.0 falls in the last bin.
std::vector<std::size_t> similarity_histogram(std::span<const double> similarities, std::size_t bins = 100);

// embeddings.jsonl, vectors written with 9 significant digits.
void save_embeddings(const std::filesystem::path& path, std::span<const EmbeddingVector> vectors);
std::vector<EmbeddingVector> load_embeddings(const std::filesystem::path& path);

}  // namespace smia::embed
