#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace smia::signals {

struct TokenLogProbs {
  std::string id;
  std::string model_id;
  std::vector<std::string> tokens;
  std::vector<double> logprobs;     // natural log, one per token
  std::vector<double> vocab_mu;     // optional: mean next-token log-prob over the vocabulary
  std::vector<double> vocab_sigma;  // optional: its standard deviation

  bool has_vocab_stats() const { return !vocab_mu.empty() && !vocab_sigma.empty(); }
};

enum class Attack { loss, ref, zlib, nei, min_k, min_kpp, smia };

std::string_view attack_name(Attack a);
std::optional<Attack> parse_attack(std::string_view s);
inline constexpr Attack kAllAttacks[] = {Attack::loss, Attack::ref,     Attack::zlib, Attack::nei,
                                         Attack::min_k, Attack::min_kpp, Attack::smia};

// Every score is oriented so that a higher value means "more member-like".
struct MembershipScore {
  std::string id;
  Attack attack = Attack::loss;
  double value = 0.0;
  nlohmann::json params = nlohmann::json::object();
};

inline constexpr int kZlibLevel = 6;

// Mean negative log-likelihood per token.
double sequence_loss(const TokenLogProbs& lp);

MembershipScore loss_score(const TokenLogProbs& lp);
// sequence_loss(reference) - sequence_loss(target)
MembershipScore ref_score(const TokenLogProbs& target, const TokenLogProbs& reference);
// -sequence_loss / C, C = zlib-compressed size of the text at level 6
MembershipScore zlib_score(const TokenLogProbs& lp, std::string_view text_bytes);
// mean neighbor loss - original loss
MembershipScore nei_score(const TokenLogProbs& orig, std::span<const TokenLogProbs> neighbors);
// Mean of the m = ceil(K * T / 100) smallest log-probs, ties broken by position.
MembershipScore min_k_score(const TokenLogProbs& lp, double k_percent);
// Same selection applied to (logprob - mu) / sigma.
MembershipScore min_kpp_score(const TokenLogProbs& lp, double k_percent);

std::size_t zlib_size(std::string_view bytes, int level = kZlibLevel);

// Schema problems that `logprobs-check` reports: lengths, sign, sigma positivity.
std::vector<std::string> validate(const TokenLogProbs& lp);

// logprobs.jsonl; load() rejects malformed lines but leaves semantic checks to validate().
std::vector<TokenLogProbs> load_logprobs(const std::filesystem::path& path);
void save_logprobs(const std::filesystem::path& path, std::span<const TokenLogProbs> records);

// scores.jsonl: {"id", "attack", "value", "params"}
void save_scores(const std::filesystem::path& path, std::span<const MembershipScore> scores);
std::vector<MembershipScore> load_scores(const std::filesystem::path& path);

}  // namespace smia::signals
