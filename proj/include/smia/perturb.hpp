#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smia/parallel.hpp"

namespace smia::perturb {

// "<mask_j>", the indexed sentinel convention of T5-style infillers.
std::string sentinel(std::size_t j);
bool contains_sentinel(std::string_view text);

struct MaskedText {
  std::string orig_id;
  std::size_t variant_index = 0;
  std::string text_with_masks;
  // Original word positions, ascending; sentinel j replaces masked_word_indices[j].
  std::vector<std::size_t> masked_word_indices;

  // Key used on the mask-fill wire: "<orig_id>#<variant_index>".
  std::string request_id() const;
};

struct NeighborSet {
  std::string orig_id;
  std::vector<std::string> neighbors;
  std::vector<std::vector<std::size_t>> masked_word_indices;
  std::string fill_provenance;
};

struct ClientDescriptor {
  std::string name;
  bool deterministic = false;
};

class MaskFillClient {
 public:
  virtual ~MaskFillClient() = default;
  virtual ClientDescriptor descriptor() const = 0;
  // One replacement per sentinel, in sentinel order. Transport problems are
  // reported as RetryableError.
  virtual std::vector<std::string> fill(const MaskedText& masked) = 0;
};

// ceil(10% of the word count); 0 for empty text.
std::size_t default_mask_count(std::size_t word_count);

// n masking variants of `text`, each replacing k distinct word positions drawn
// afresh (partial Fisher-Yates on SplitMix64(seed)). Positions may repeat across
// variants. Whitespace between unmasked words is preserved.
std::vector<MaskedText> mask_plan(std::string_view orig_id, std::string_view text, std::size_t n, std::size_t k,
                                  std::uint64_t seed);

// Replaces each sentinel of `masked` by its replacement. An empty replacement
// deletes the word slot together with its separator.
std::string splice(const MaskedText& masked, std::span<const std::string> replacements);

NeighborSet fill_neighbors(std::span<const MaskedText> plans, MaskFillClient& client,
                           const ParallelOptions& options = {});

// Replacement j = lexicon[h mod |lexicon|],
// h = hash_combine(hash_combine(hash_combine(fnv1a64(orig_id), variant_index), j), seed).
std::vector<std::string> stub_fill(const MaskedText& masked, std::span<const std::string> lexicon,
                                   std::uint64_t seed);

const std::vector<std::string>& default_lexicon();

class StubMaskFill final : public MaskFillClient {
 public:
  explicit StubMaskFill(std::vector<std::string> lexicon = default_lexicon(), std::uint64_t seed = 0);
  ClientDescriptor descriptor() const override { return {"stub-lexicon", true}; }
  std::vector<std::string> fill(const MaskedText& masked) override;

 private:
  std::vector<std::string> lexicon_;
  std::uint64_t seed_;
};

// Serves replacements produced offline by the model bridge, keyed by request id.
// Response file lines: {"id": str, "replacements": [str]}.
class ReplayMaskFill final : public MaskFillClient {
 public:
  explicit ReplayMaskFill(const std::filesystem::path& responses);
  ClientDescriptor descriptor() const override { return {"bridge-file", true}; }
  std::vector<std::string> fill(const MaskedText& masked) override;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> responses_;
};

// masks.jsonl (wire request superset): {"id", "orig_id", "variant_index", "text_with_masks", "masked_word_indices"}
void save_masks(const std::filesystem::path& path, std::span<const MaskedText> plans);
std::vector<MaskedText> load_masks(const std::filesystem::path& path);

// neighbors.jsonl: {"orig_id", "variant_index", "text", "masked_word_indices"}
void save_neighbors(const std::filesystem::path& path, std::span<const NeighborSet> sets);
std::vector<NeighborSet> load_neighbors(const std::filesystem::path& path);

// Id of neighbor i of an original in the embedding and log-prob files.
std::string neighbor_id(std::string_view orig_id, std::size_t index);

}  // namespace smia::perturb
