#include "smia/corpus.hpp"

#include <unordered_set>

#include "smia/error.hpp"
#include "smia/jsonl.hpp"
#include "smia/perturb.hpp"
#include "smia/rng.hpp"
#include "smia/text.hpp"

namespace smia::corpus {

std::string_view to_string(Label l) { return l == Label::member ? "member" : "nonmember"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

std::string_view to_string(ModificationKind k) {
  switch (k) {
    case ModificationKind::duplication: return "duplication";
    case ModificationKind::deletion: return "deletion";
    case ModificationKind::addition: return "addition";
  }
  return "duplication";
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "member") return Label::member;
  if (s == "nonmember") return Label::nonmember;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  return std::nullopt;
}

std::optional<ModificationKind> parse_modification(std::string_view s) {
  if (s == "duplication") return ModificationKind::duplication;
  if (s == "deletion") return ModificationKind::deletion;
  if (s == "addition") return ModificationKind::addition;
  return std::nullopt;
}

std::string TextRecord::rendered() const { return title.empty() ? body : title + "\n\n" + body; }

std::vector<TextRecord> prepare_records(std::vector<TextRecord> raw, std::size_t min_words, std::size_t max_words) {
  if (min_words > max_words) {
    fail(ErrorKind::config,
         "min_words (" + std::to_string(min_words) + ") exceeds max_words (" + std::to_string(max_words) + ")");
  }
  std::unordered_set<std::string> seen;
  for (const auto& r : raw) {
    if (r.id.empty()) fail(ErrorKind::invalid_input, "record with empty id");
    if (!seen.insert(r.id).second) fail(ErrorKind::invalid_input, "duplicate record id: " + r.id);
  }
  std::vector<TextRecord> out;
  out.reserve(raw.size());
  for (auto& r : raw) {
    const auto spans = text::word_spans(r.body);
    if (spans.size() < min_words) continue;
    if (spans.size() > max_words) {
      r.body.resize(max_words == 0 ? 0 : spans[max_words - 1].end);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string duplicate_word_at(std::string_view text, std::size_t index) {
  const auto spans = text::word_spans(text);
  if (index >= spans.size()) fail(ErrorKind::invalid_input, "word index out of range");
  const auto& w = spans[index];
  std::string out(text.substr(0, w.end));
  out += ' ';
  out.append(text.substr(w.begin));
  return out;
}

std::string delete_word_at(std::string_view text, std::size_t index) {
  const auto spans = text::word_spans(text);
  if (index >= spans.size()) fail(ErrorKind::invalid_input, "word index out of range");
  return text::erase_word(text, spans[index]);
}

std::string insert_word_at(std::string_view text, std::size_t position, std::string_view word) {
  const auto spans = text::word_spans(text);
  if (position > spans.size()) fail(ErrorKind::invalid_input, "insert position out of range");
  std::string out;
  if (spans.empty()) return std::string(word);
  if (position < spans.size()) {
    const auto at = spans[position].begin;
    out.append(text.substr(0, at));
    out.append(word);
    out += ' ';
    out.append(text.substr(at));
  } else {
    const auto at = spans.back().end;
    out.append(text.substr(0, at));
    out += ' ';
    out.append(word);
    out.append(text.substr(at));
  }
  return out;
}

namespace {

TextRecord derived(const TextRecord& r, ModificationKind kind, std::string body, std::string_view suffix) {
  TextRecord out = r;
  out.body = std::move(body);
  out.source_id = r.source_id.empty() ? r.id : r.source_id;
  out.id = r.id + std::string(suffix);
  out.modification = kind;
  return out;
}

}  // namespace

TextRecord modify_duplicate(const TextRecord& record, std::uint64_t seed) {
  const std::size_t w = text::count_words(record.body);
  if (w == 0) fail(ErrorKind::degenerate, "cannot duplicate a word of empty text (id " + record.id + ")");
  SplitMix64 rng(seed);
  const auto index = rng.uniform_index(w);
  return derived(record, ModificationKind::duplication, duplicate_word_at(record.body, index), "~dup");
}

TextRecord modify_delete(const TextRecord& record, std::uint64_t seed) {
  const std::size_t w = text::count_words(record.body);
  if (w < 2) fail(ErrorKind::degenerate, "deletion needs at least 2 words (id " + record.id + ")");
  SplitMix64 rng(seed);
  const auto index = rng.uniform_index(w);
  return derived(record, ModificationKind::deletion, delete_word_at(record.body, index), "~del");
}

TextRecord modify_add(const TextRecord& record, perturb::MaskFillClient& filler, std::uint64_t seed) {
  const std::size_t w = text::count_words(record.body);
  if (w == 0) fail(ErrorKind::degenerate, "cannot add a word to empty text (id " + record.id + ")");
  SplitMix64 rng(seed);
  const auto position = rng.uniform_index(w + 1);

  perturb::MaskedText masked;
  masked.orig_id = record.id;
  masked.variant_index = 0;
  masked.text_with_masks = insert_word_at(record.body, position, perturb::sentinel(0));
  masked.masked_word_indices = {position};

  std::vector<std::string> replacements;
  try {
    replacements = filler.fill(masked);
  } catch (const Error& e) {
    throw Error(e.kind(), "mask filler failed for " + record.id + " at position " + std::to_string(position) +
                              ": " + e.what());
  }
  if (replacements.size() != 1) {
    fail(ErrorKind::invalid_input, "mask filler returned " + std::to_string(replacements.size()) +
                                       " replacements for 1 mask (id " + record.id + ")");
  }
  const auto words = text::split_words(replacements.front());
  if (words.empty()) {
    fail(ErrorKind::degenerate, "mask filler returned an empty replacement for " + record.id + " at position " +
                                    std::to_string(position));
  }
  return derived(record, ModificationKind::addition, insert_word_at(record.body, position, words.front()), "~add");
}

TextRecord modify(const TextRecord& record, ModificationKind kind, perturb::MaskFillClient& filler,
                  std::uint64_t seed) {
  switch (kind) {
    case ModificationKind::duplication: return modify_duplicate(record, seed);
    case ModificationKind::deletion: return modify_delete(record, seed);
    case ModificationKind::addition: return modify_add(record, filler, seed);
  }
  return record;
}

std::vector<TextRecord> load_texts(const std::filesystem::path& path) {
  std::vector<TextRecord> out;
  std::unordered_set<std::string> seen;
  jsonl::for_each_line(path, [&](const jsonl::Json& j, const jsonl::Where& w) {
    TextRecord r;
    r.id = jsonl::get_string(j, "id", w);
    if (r.id.empty()) fail(ErrorKind::schema, w.str() + ": empty id");
    if (!seen.insert(r.id).second) fail(ErrorKind::schema, w.str() + ": duplicate id " + r.id);
    r.title = jsonl::get_string(j, "title", w);
    r.body = jsonl::get_string(j, "body", w);
    const auto label = parse_label(jsonl::get_string(j, "label", w));
    if (!label) fail(ErrorKind::schema, w.str() + ": label must be \"member\" or \"nonmember\"");
    r.label = *label;
    const auto split = parse_split(jsonl::get_string(j, "split", w));
    if (!split) fail(ErrorKind::schema, w.str() + ": split must be train, validation or test");
    r.split = *split;
    if (j.contains("source_id")) r.source_id = jsonl::get_string(j, "source_id", w);
    if (j.contains("modification")) {
      const auto kind = parse_modification(jsonl::get_string(j, "modification", w));
      if (!kind) fail(ErrorKind::schema, w.str() + ": unknown modification");
      r.modification = kind;
    }
    out.push_back(std::move(r));
  });
  return out;
}

void save_texts(const std::filesystem::path& path, const std::vector<TextRecord>& records) {
  jsonl::Writer out(path);
  for (const auto& r : records) {
    jsonl::Json j = {{"id", r.id},
                     {"title", r.title},
                     {"body", r.body},
                     {"label", to_string(r.label)},
                     {"split", to_string(r.split)}};
    if (!r.source_id.empty()) j["source_id"] = r.source_id;
    if (r.modification) j["modification"] = to_string(*r.modification);
    out.write(j);
  }
  out.close();
}

}  // namespace smia::corpus
