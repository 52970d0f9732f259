#include "smia/embed.hpp"

#include <algorithm>
#include <cmath>

#include "smia/error.hpp"
#include "smia/jsonl.hpp"
#include "smia/rng.hpp"
#include "smia/simd/kernels.hpp"
#include "smia/text.hpp"

namespace smia::embed {

EmbeddingVector stub_embed(std::string_view text, std::size_t d, std::uint64_t seed) {
  if (d < 2) fail(ErrorKind::invalid_input, "stub_embed: dimension must be at least 2");
  const auto spans = text::word_spans(text);
  if (spans.empty()) fail(ErrorKind::degenerate, "stub_embed: empty text");
  std::vector<double> v(d, 0.0);
  const std::uint64_t base = mix64(seed);
  for (const auto& w : spans) {
    const std::uint64_t h = hash_combine(base, fnv1a64(text.substr(w.begin, w.end - w.begin)));
    v[h % d] += (h >> 63) ? -1.0 : 1.0;
  }
  const double norm = std::sqrt(simd::dot(v, v));
  if (norm == 0.0) fail(ErrorKind::degenerate, "stub_embed: word hashes cancelled to a zero vector");
  for (auto& x : v) x /= norm;
  return {"", std::move(v)};
}

StubEmbedding::StubEmbedding(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension_ < 2) fail(ErrorKind::config, "embedding dimension must be at least 2");
}

std::vector<double> StubEmbedding::embed(std::string_view, std::string_view text) {
  return stub_embed(text, dimension_, seed_).values;
}

ReplayEmbedding::ReplayEmbedding(const std::filesystem::path& embeddings) {
  jsonl::require_file(embeddings, "model-bridge embed_batch");
  for (auto& v : load_embeddings(embeddings)) {
    if (dimension_ == 0) dimension_ = v.values.size();
    if (v.values.size() != dimension_) {
      fail(ErrorKind::schema, embeddings.string() + ": vector " + v.id + " has dimension " +
                                  std::to_string(v.values.size()) + ", expected " + std::to_string(dimension_));
    }
    vectors_.emplace(std::move(v.id), std::move(v.values));
  }
}

std::vector<double> ReplayEmbedding::embed(std::string_view id, std::string_view) {
  const auto it = vectors_.find(id);
  if (it == vectors_.end()) fail(ErrorKind::upstream_missing, "no bridge embedding for " + std::string(id));
  return it->second;
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::pair<std::string, std::string>> texts,
                                         EmbeddingClient& client, const ParallelOptions& options) {
  if (texts.empty()) fail(ErrorKind::invalid_input, "embed_texts: no texts");
  const std::size_t d = client.descriptor().dimension;
  return ordered_map<EmbeddingVector>(texts.size(), options.max_in_flight, [&](std::size_t i) {
    const auto& [id, body] = texts[i];
    auto values = with_retries(options.max_attempts, [&] { return client.embed(id, body); });
    if (values.size() != d) {
      fail(ErrorKind::invalid_input, "embedding for " + id + " has dimension " + std::to_string(values.size()) +
                                         ", expected " + std::to_string(d));
    }
    if (!std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); }))
      fail(ErrorKind::invalid_input, "embedding for " + id + " has non-finite entries");
    return EmbeddingVector{id, std::move(values)};
  });
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::invalid_input,
         "cosine: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const double na = std::sqrt(simd::dot(a, a));
  const double nb = std::sqrt(simd::dot(b, b));
  if (na == 0.0 || nb == 0.0) fail(ErrorKind::invalid_input, "cosine: zero-norm vector");
  return std::clamp(simd::dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<std::size_t> similarity_histogram(std::span<const double> similarities, std::size_t bins) {
  if (bins == 0) fail(ErrorKind::invalid_input, "histogram needs at least one bin");
  std::vector<std::size_t> counts(bins, 0);
  for (double s : similarities) {
    const double c = std::clamp(s, 0.0, 1.0);
    auto b = static_cast<std::size_t>(c * static_cast<double>(bins));
    counts[std::min(b, bins - 1)]++;
  }
  return counts;
}

void save_embeddings(const std::filesystem::path& path, std::span<const EmbeddingVector> vectors) {
  jsonl::Writer out(path);
  for (const auto& v : vectors) {
    out.write_raw("{\"id\":" + jsonl::quote(v.id) + ",\"vector\":" + jsonl::format_array(v.values, 9) + "}");
  }
  out.close();
}

std::vector<EmbeddingVector> load_embeddings(const std::filesystem::path& path) {
  std::vector<EmbeddingVector> out;
  jsonl::for_each_line(path, [&](const jsonl::Json& j, const jsonl::Where& w) {
    EmbeddingVector v{jsonl::get_string(j, "id", w), jsonl::get_numbers(j, "vector", w)};
    if (v.values.empty()) fail(ErrorKind::schema, w.str() + ": empty vector");
    out.push_back(std::move(v));
  });
  return out;
}

}  // namespace smia::embed
