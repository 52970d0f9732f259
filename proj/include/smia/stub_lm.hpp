#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "smia/signals.hpp"

namespace smia::signals {

// Offline stand-in for a target or reference LLM: a word-level bigram model
// interpolated with an add-alpha unigram,
//   p(w | prev) = lambda * c(prev, w) / c(prev) + (1 - lambda) * p_uni(w)   if c(prev) > 0
//               = p_uni(w)                                                 otherwise,
//   p_uni(w) = (c(w) + alpha) / (N + alpha * V).
// Texts it was trained on get low loss on their bigrams, which is what the
// attacks look for. Scores are exact log-probabilities, and vocab_mu/vocab_sigma
// are exact moments of log p(. | prev) over the whole vocabulary.
class StubLanguageModel {
 public:
  StubLanguageModel(std::string model_id, double bigram_weight, double unigram_alpha = 0.5);

  void train(std::string_view text);
  // Adds words to the vocabulary without counting them.
  void add_vocabulary(std::string_view text);
  // Freezes counts and precomputes vocabulary moments. Must precede score().
  void finalize();

  TokenLogProbs score(std::string id, std::string_view text) const;
  std::size_t vocabulary_size() const { return vocab_.size(); }
  const std::string& model_id() const { return model_id_; }

 private:
  std::size_t intern(std::string_view w);
  double unigram(std::size_t w) const;

  std::string model_id_;
  double lambda_;
  double alpha_;
  bool finalized_ = false;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> vocab_;
  std::vector<double> unigram_counts_;
  double total_ = 0.0;
  std::vector<std::unordered_map<std::size_t, double>> successors_;  // per prev word
  std::vector<double> context_counts_;
  // Sum and sum of squares of log((1 - lambda) * p_uni(w)) and of log p_uni(w) over V.
  double sum_scaled_ = 0.0, sumsq_scaled_ = 0.0, sum_uni_ = 0.0, sumsq_uni_ = 0.0;
};

}  // namespace smia::signals
