#include "smia/stub_lm.hpp"

#include <algorithm>
#include <cmath>

#include "smia/error.hpp"
#include "smia/text.hpp"

namespace smia::signals {

namespace {
constexpr std::size_t kBos = 0;  // "<s>" context, never predicted
constexpr std::size_t kUnk = 1;
}  // namespace

StubLanguageModel::StubLanguageModel(std::string model_id, double bigram_weight, double unigram_alpha)
    : model_id_(std::move(model_id)), lambda_(bigram_weight), alpha_(unigram_alpha) {
  if (!(lambda_ >= 0.0 && lambda_ < 1.0)) fail(ErrorKind::config, "stub LM bigram weight must be in [0, 1)");
  if (!(alpha_ > 0.0)) fail(ErrorKind::config, "stub LM smoothing must be positive");
  intern("<s>");
  intern("<unk>");
}

std::size_t StubLanguageModel::intern(std::string_view w) {
  auto [it, inserted] = index_.emplace(std::string(w), vocab_.size());
  if (inserted) {
    vocab_.emplace_back(w);
    unigram_counts_.push_back(0.0);
    successors_.emplace_back();
    context_counts_.push_back(0.0);
  }
  return it->second;
}

void StubLanguageModel::train(std::string_view text) {
  if (finalized_) fail(ErrorKind::invalid_input, "stub LM already finalized");
  std::size_t prev = kBos;
  for (const auto& w : text::split_words(text)) {
    const std::size_t id = intern(w);
    unigram_counts_[id] += 1.0;
    total_ += 1.0;
    successors_[prev][id] += 1.0;
    context_counts_[prev] += 1.0;
    prev = id;
  }
}

void StubLanguageModel::add_vocabulary(std::string_view text) {
  if (finalized_) fail(ErrorKind::invalid_input, "stub LM already finalized");
  for (const auto& w : text::split_words(text)) intern(w);
}

double StubLanguageModel::unigram(std::size_t w) const {
  // "<s>" is not a predictable word.
  const double v = static_cast<double>(vocab_.size() - 1);
  return (unigram_counts_[w] + alpha_) / (total_ + alpha_ * v);
}

void StubLanguageModel::finalize() {
  sum_scaled_ = sumsq_scaled_ = sum_uni_ = sumsq_uni_ = 0.0;
  for (std::size_t w = 1; w < vocab_.size(); ++w) {
    const double lu = std::log(unigram(w));
    const double ls = lambda_ > 0.0 ? std::log1p(-lambda_) + lu : lu;
    sum_uni_ += lu;
    sumsq_uni_ += lu * lu;
    sum_scaled_ += ls;
    sumsq_scaled_ += ls * ls;
  }
  finalized_ = true;
}

TokenLogProbs StubLanguageModel::score(std::string id, std::string_view text) const {
  if (!finalized_) fail(ErrorKind::invalid_input, "stub LM used before finalize()");
  TokenLogProbs out;
  out.id = std::move(id);
  out.model_id = model_id_;
  out.tokens = text::split_words(text);
  const double v = static_cast<double>(vocab_.size() - 1);
  std::size_t prev = kBos;
  for (const auto& tok : out.tokens) {
    const auto found = index_.find(tok);
    const std::size_t w = found == index_.end() || found->second == kBos ? kUnk : found->second;
    const double c_prev = context_counts_[prev];
    const bool has_context = lambda_ > 0.0 && c_prev > 0.0;

    double lp;
    double sum, sumsq;
    if (has_context) {
      const auto& succ = successors_[prev];
      const auto hit = succ.find(w);
      const double bigram = hit == succ.end() ? 0.0 : hit->second / c_prev;
      lp = std::log(lambda_ * bigram + (1.0 - lambda_) * unigram(w));
      sum = sum_scaled_;
      sumsq = sumsq_scaled_;
      for (const auto& [s, c] : succ) {
        const double base = std::log1p(-lambda_) + std::log(unigram(s));
        const double actual = std::log(lambda_ * c / c_prev + (1.0 - lambda_) * unigram(s));
        sum += actual - base;
        sumsq += actual * actual - base * base;
      }
    } else {
      lp = std::log(unigram(w));
      sum = sum_uni_;
      sumsq = sumsq_uni_;
    }
    const double mu = sum / v;
    const double var = std::max(sumsq / v - mu * mu, 1e-12);
    out.logprobs.push_back(std::min(lp, 0.0));
    out.vocab_mu.push_back(mu);
    out.vocab_sigma.push_back(std::sqrt(var));
    prev = w;
  }
  return out;
}

}  // namespace smia::signals
