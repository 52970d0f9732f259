#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace smia::text {

// Byte offsets of one word in its source string; [begin, end).
struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// A word is a maximal run of non-whitespace bytes. Whitespace is the ASCII set
// " \t\n\v\f\r"; punctuation stays attached to its word.
bool is_space(char c);
std::vector<WordSpan> word_spans(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::size_t count_words(std::string_view s);
std::string join_words(const std::vector<std::string>& words, std::string_view sep = " ");

// Removes the word at span `w` together with the whitespace run that follows it
// (or the one that precedes it when the word is last), so no double separator is left.
std::string erase_word(std::string_view s, const WordSpan& w);

}  // namespace smia::text
