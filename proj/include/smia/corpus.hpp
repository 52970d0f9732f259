#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smia::perturb {
class MaskFillClient;
}

namespace smia::corpus {

enum class Label { member, nonmember };
enum class Split { train, validation, test };
enum class ModificationKind { duplication, deletion, addition };

std::string_view to_string(Label l);
std::string_view to_string(Split s);
std::string_view to_string(ModificationKind k);
std::optional<Label> parse_label(std::string_view s);
std::optional<Split> parse_split(std::string_view s);
std::optional<ModificationKind> parse_modification(std::string_view s);

struct TextRecord {
  std::string id;
  std::string title;
  std::string body;
  Label label = Label::nonmember;
  Split split = Split::train;
  // Set on modified records only.
  std::string source_id;
  std::optional<ModificationKind> modification;

  // title + "\n\n" + body, or just body when the title is empty.
  std::string rendered() const;
  bool is_member() const { return label == Label::member; }
};

// Drops records whose body has fewer than min_words words and truncates longer
// bodies to their first max_words words. Word bounds apply to the body only; the
// title is not counted. Survivors keep their input order.
std::vector<TextRecord> prepare_records(std::vector<TextRecord> raw, std::size_t min_words, std::size_t max_words);

// Index-explicit edits on whitespace-delimited words. Separators are preserved.
std::string duplicate_word_at(std::string_view text, std::size_t index);
std::string delete_word_at(std::string_view text, std::size_t index);
// position in [0, word_count]; the new word is placed before word `position`.
std::string insert_word_at(std::string_view text, std::size_t position, std::string_view word);

// The three single-word member modifications. Each draws its index from
// SplitMix64(seed) and edits the record body; the title is left alone. The
// result carries id "<id>~dup|~del|~add", source_id = original id, same label.
TextRecord modify_duplicate(const TextRecord& record, std::uint64_t seed);
TextRecord modify_delete(const TextRecord& record, std::uint64_t seed);
// Inserts "<mask_0>" at a drawn inter-word position, asks the filler for it and
// keeps only the first word of the replacement.
TextRecord modify_add(const TextRecord& record, perturb::MaskFillClient& filler, std::uint64_t seed);
TextRecord modify(const TextRecord& record, ModificationKind kind, perturb::MaskFillClient& filler, std::uint64_t seed);

// texts.jsonl
std::vector<TextRecord> load_texts(const std::filesystem::path& path);
void save_texts(const std::filesystem::path& path, const std::vector<TextRecord>& records);

}  // namespace smia::corpus
