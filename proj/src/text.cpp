#include "smia/text.hpp"

namespace smia::text {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

std::vector<WordSpan> word_spans(std::string_view s) {
  std::vector<WordSpan> spans;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i == s.size()) break;
    const std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    spans.push_back({b, i});
  }
  return spans;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  for (const auto& w : word_spans(s)) words.emplace_back(s.substr(w.begin, w.end - w.begin));
  return words;
}

std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool sp = is_space(c);
    if (!sp && !in_word) ++n;
    in_word = !sp;
  }
  return n;
}

std::string join_words(const std::vector<std::string>& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

std::string erase_word(std::string_view s, const WordSpan& w) {
  std::size_t b = w.begin;
  std::size_t e = w.end;
  std::size_t after = e;
  while (after < s.size() && is_space(s[after])) ++after;
  if (after < s.size() || b == 0) {
    e = after;
  } else {
    while (b > 0 && is_space(s[b - 1])) --b;
  }
  std::string out;
  out.reserve(s.size() - (e - b));
  out.append(s.substr(0, b));
  out.append(s.substr(e));
  return out;
}

}  // namespace smia::text
