#include "smia/perturb.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "smia/error.hpp"
#include "smia/jsonl.hpp"
#include "smia/rng.hpp"
#include "smia/text.hpp"

namespace smia::perturb {

std::string sentinel(std::size_t j) { return "<mask_" + std::to_string(j) + ">"; }

bool contains_sentinel(std::string_view text) { return text.find("<mask_") != std::string_view::npos; }

std::string MaskedText::request_id() const { return orig_id + "#" + std::to_string(variant_index); }

std::string neighbor_id(std::string_view orig_id, std::size_t index) {
  return std::string(orig_id) + "#" + std::to_string(index);
}

std::size_t default_mask_count(std::size_t word_count) { return (word_count + 9) / 10; }

std::vector<MaskedText> mask_plan(std::string_view orig_id, std::string_view text, std::size_t n, std::size_t k,
                                  std::uint64_t seed) {
  if (n == 0) fail(ErrorKind::invalid_input, "mask_plan: n must be at least 1");
  if (contains_sentinel(text)) {
    fail(ErrorKind::invalid_input, "text " + std::string(orig_id) + " already contains a mask sentinel");
  }
  const auto spans = text::word_spans(text);
  if (k > spans.size()) {
    fail(ErrorKind::invalid_input, "mask_plan: k=" + std::to_string(k) + " exceeds the " +
                                       std::to_string(spans.size()) + " words of " + std::string(orig_id));
  }
  SplitMix64 rng(seed);
  std::vector<std::size_t> order(spans.size());
  std::vector<MaskedText> plans;
  plans.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t t = 0; t < k; ++t) {
      const auto j = t + rng.uniform_index(order.size() - t);
      std::swap(order[t], order[j]);
    }
    std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(picked.begin(), picked.end());

    std::string masked;
    masked.reserve(text.size() + 8 * k);
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < picked.size(); ++j) {
      const auto& w = spans[picked[j]];
      masked.append(text.substr(cursor, w.begin - cursor));
      masked += sentinel(j);
      cursor = w.end;
    }
    masked.append(text.substr(cursor));
    plans.push_back({std::string(orig_id), v, std::move(masked), std::move(picked)});
  }
  return plans;
}

std::string splice(const MaskedText& masked, std::span<const std::string> replacements) {
  const std::size_t k = masked.masked_word_indices.size();
  if (replacements.size() != k) {
    fail(ErrorKind::invalid_input, "variant " + masked.request_id() + ": expected " + std::to_string(k) +
                                       " replacements, got " + std::to_string(replacements.size()));
  }
  const std::string& src = masked.text_with_masks;
  const auto spans = text::word_spans(src);
  // Right to left so earlier offsets stay valid.
  std::string out = src;
  std::size_t found = 0;
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    const std::string_view word(src.data() + it->begin, it->end - it->begin);
    if (!word.starts_with("<mask_") || !word.ends_with(">")) continue;
    std::size_t j = 0;
    const auto digits = word.substr(6, word.size() - 7);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    j = std::stoul(std::string(digits));
    if (j >= k) fail(ErrorKind::invalid_input, "variant " + masked.request_id() + ": stray sentinel " + std::string(word));
    ++found;
    const std::string& rep = replacements[j];
    if (text::count_words(rep) == 0) {
      out = text::erase_word(out, *it);
    } else {
      out.replace(it->begin, it->end - it->begin, rep);
    }
  }
  if (found != k) {
    fail(ErrorKind::invalid_input, "variant " + masked.request_id() + ": found " + std::to_string(found) +
                                       " sentinels, expected " + std::to_string(k));
  }
  if (contains_sentinel(out)) {
    fail(ErrorKind::invalid_input, "variant " + masked.request_id() + ": replacement introduced a sentinel");
  }
  return out;
}

NeighborSet fill_neighbors(std::span<const MaskedText> plans, MaskFillClient& client, const ParallelOptions& options) {
  if (plans.empty()) fail(ErrorKind::invalid_input, "fill_neighbors: no plans");
  std::vector<const MaskedText*> ordered;
  for (const auto& p : plans) {
    if (p.orig_id != plans.front().orig_id) {
      fail(ErrorKind::invalid_input, "fill_neighbors: plans mix ids " + plans.front().orig_id + " and " + p.orig_id);
    }
    ordered.push_back(&p);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const MaskedText* a, const MaskedText* b) { return a->variant_index < b->variant_index; });
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (ordered[i]->variant_index != i) {
      fail(ErrorKind::invalid_input, "fill_neighbors: variant indices of " + plans.front().orig_id +
                                         " are not 0..n-1");
    }
  }

  auto filled = ordered_map<std::string>(ordered.size(), options.max_in_flight, [&](std::size_t i) {
    const MaskedText& plan = *ordered[i];
    auto replacements = with_retries(options.max_attempts, [&] { return client.fill(plan); });
    return splice(plan, replacements);
  });

  NeighborSet set;
  set.orig_id = plans.front().orig_id;
  set.neighbors = std::move(filled);
  for (const auto* p : ordered) set.masked_word_indices.push_back(p->masked_word_indices);
  set.fill_provenance = client.descriptor().name;
  return set;
}

std::vector<std::string> stub_fill(const MaskedText& masked, std::span<const std::string> lexicon,
                                   std::uint64_t seed) {
  if (lexicon.empty()) fail(ErrorKind::invalid_input, "stub_fill: empty lexicon");
  std::vector<std::string> out;
  out.reserve(masked.masked_word_indices.size());
  const std::uint64_t base = hash_combine(fnv1a64(masked.orig_id), masked.variant_index);
  for (std::size_t j = 0; j < masked.masked_word_indices.size(); ++j) {
    const std::uint64_t h = hash_combine(hash_combine(base, j), seed);
    out.push_back(lexicon[h % lexicon.size()]);
  }
  return out;
}

const std::vector<std::string>& default_lexicon() {
  static const std::vector<std::string> words = {
      "time",     "year",    "people",   "way",      "day",      "man",      "thing",   "woman",   "life",
      "child",    "world",   "school",   "state",    "family",   "student",  "group",   "country", "problem",
      "hand",     "part",    "place",    "case",     "week",     "company",  "system",  "program", "question",
      "work",     "number",  "night",    "point",    "home",     "water",    "room",    "mother",  "area",
      "money",    "story",   "fact",     "month",    "lot",      "right",    "study",   "book",    "eye",
      "job",      "word",    "business", "issue",    "side",     "kind",     "head",    "house",   "service",
      "friend",   "father",  "power",    "hour",     "game",     "line",     "end",     "member",  "law",
      "car",      "city",    "community", "name",    "president", "team",    "minute",  "idea",    "kid",
      "body",     "information", "back", "parent",   "face",     "others",   "level",   "office",  "door",
      "health",   "person",  "art",      "war",      "history",  "party",    "result",  "change",  "morning",
      "reason",   "research", "girl",    "guy",      "moment",   "air",      "teacher", "force",   "education",
      "early",    "large",   "small",    "new",      "old",      "great",    "local",   "public",  "national",
      "major",    "known",   "later",    "first",    "second",   "main",     "several", "various", "modern",
      "built",    "named",   "played",   "served",   "became",   "found",    "called",  "moved",   "released",
      "located",  "born",    "began",    "won",      "led",      "written",  "formed",  "held",    "received",
      "river",    "village", "county",   "church",   "album",    "film",     "season",  "station", "north",
      "south",    "east",    "west",     "league",   "club",     "district", "island",  "species", "army",
  };
  return words;
}

StubMaskFill::StubMaskFill(std::vector<std::string> lexicon, std::uint64_t seed)
    : lexicon_(std::move(lexicon)), seed_(seed) {
  if (lexicon_.empty()) fail(ErrorKind::invalid_input, "stub_fill: empty lexicon");
}

std::vector<std::string> StubMaskFill::fill(const MaskedText& masked) { return stub_fill(masked, lexicon_, seed_); }

ReplayMaskFill::ReplayMaskFill(const std::filesystem::path& responses) {
  jsonl::require_file(responses, "model-bridge fill_masks");
  jsonl::for_each_line(responses, [&](const jsonl::Json& j, const jsonl::Where& w) {
    auto id = jsonl::get_string(j, "id", w);
    auto reps = jsonl::get_strings(j, "replacements", w);
    if (!responses_.emplace(std::move(id), std::move(reps)).second)
      fail(ErrorKind::schema, w.str() + ": duplicate response id");
  });
}

std::vector<std::string> ReplayMaskFill::fill(const MaskedText& masked) {
  const auto it = responses_.find(masked.request_id());
  if (it == responses_.end()) fail(ErrorKind::upstream_missing, "no bridge response for " + masked.request_id());
  return it->second;
}

namespace {

std::string index_array(const std::vector<std::size_t>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out + "]";
}

std::vector<std::size_t> to_sizes(const std::vector<std::int64_t>& v, const jsonl::Where& w) {
  std::vector<std::size_t> out;
  for (auto x : v) {
    if (x < 0) fail(ErrorKind::schema, w.str() + ": negative word index");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

}  // namespace

void save_masks(const std::filesystem::path& path, std::span<const MaskedText> plans) {
  jsonl::Writer out(path);
  for (const auto& p : plans) {
    out.write_raw("{\"id\":" + jsonl::quote(p.request_id()) + ",\"orig_id\":" + jsonl::quote(p.orig_id) +
                  ",\"variant_index\":" + std::to_string(p.variant_index) +
                  ",\"text_with_masks\":" + jsonl::quote(p.text_with_masks) +
                  ",\"masked_word_indices\":" + index_array(p.masked_word_indices) + "}");
  }
  out.close();
}

std::vector<MaskedText> load_masks(const std::filesystem::path& path) {
  std::vector<MaskedText> out;
  jsonl::for_each_line(path, [&](const jsonl::Json& j, const jsonl::Where& w) {
    MaskedText m;
    m.orig_id = jsonl::get_string(j, "orig_id", w);
    const auto v = jsonl::get_int(j, "variant_index", w);
    if (v < 0) fail(ErrorKind::schema, w.str() + ": negative variant_index");
    m.variant_index = static_cast<std::size_t>(v);
    m.text_with_masks = jsonl::get_string(j, "text_with_masks", w);
    m.masked_word_indices = to_sizes(jsonl::get_ints(j, "masked_word_indices", w), w);
    out.push_back(std::move(m));
  });
  return out;
}

void save_neighbors(const std::filesystem::path& path, std::span<const NeighborSet> sets) {
  jsonl::Writer out(path);
  for (const auto& s : sets) {
    for (std::size_t i = 0; i < s.neighbors.size(); ++i) {
      const auto& idx = i < s.masked_word_indices.size() ? s.masked_word_indices[i] : std::vector<std::size_t>{};
      out.write_raw("{\"orig_id\":" + jsonl::quote(s.orig_id) + ",\"variant_index\":" + std::to_string(i) +
                    ",\"text\":" + jsonl::quote(s.neighbors[i]) + ",\"masked_word_indices\":" + index_array(idx) +
                    ",\"fill_provenance\":" + jsonl::quote(s.fill_provenance) + "}");
    }
  }
  out.close();
}

std::vector<NeighborSet> load_neighbors(const std::filesystem::path& path) {
  std::vector<NeighborSet> sets;
  std::unordered_map<std::string, std::size_t> where_of;
  struct Entry {
    std::size_t index;
    std::string text;
    std::vector<std::size_t> masked;
  };
  std::vector<std::vector<Entry>> entries;
  jsonl::for_each_line(path, [&](const jsonl::Json& j, const jsonl::Where& w) {
    const auto id = jsonl::get_string(j, "orig_id", w);
    const auto v = jsonl::get_int(j, "variant_index", w);
    if (v < 0) fail(ErrorKind::schema, w.str() + ": negative variant_index");
    auto text = jsonl::get_string(j, "text", w);
    if (contains_sentinel(text)) fail(ErrorKind::schema, w.str() + ": neighbor still contains a sentinel");
    auto masked = to_sizes(jsonl::get_ints(j, "masked_word_indices", w), w);
    auto [it, inserted] = where_of.emplace(id, sets.size());
    if (inserted) {
      sets.push_back({id, {}, {}, j.contains("fill_provenance") && j["fill_provenance"].is_string()
                                      ? j["fill_provenance"].get<std::string>()
                                      : std::string("file")});
      entries.emplace_back();
    }
    entries[it->second].push_back({static_cast<std::size_t>(v), std::move(text), std::move(masked)});
  });
  for (std::size_t s = 0; s < sets.size(); ++s) {
    auto& e = entries[s];
    std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i].index != i) {
        fail(ErrorKind::schema, path.string() + ": variants of " + sets[s].orig_id + " are not contiguous from 0");
      }
      sets[s].neighbors.push_back(std::move(e[i].text));
      sets[s].masked_word_indices.push_back(std::move(e[i].masked));
    }
  }
  return sets;
}

}  // namespace smia::perturb
