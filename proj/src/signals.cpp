#include "smia/signals.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smia/error.hpp"
#include "smia/jsonl.hpp"

namespace smia::signals {

std::string_view attack_name(Attack a) {
  switch (a) {
    case Attack::loss: return "loss";
    case Attack::ref: return "ref";
    case Attack::zlib: return "zlib";
    case Attack::nei: return "nei";
    case Attack::min_k: return "min_k";
    case Attack::min_kpp: return "min_kpp";
    case Attack::smia: return "smia";
  }
  return "loss";
}

std::optional<Attack> parse_attack(std::string_view s) {
  for (Attack a : kAllAttacks)
    if (attack_name(a) == s) return a;
  return std::nullopt;
}

double sequence_loss(const TokenLogProbs& lp) {
  if (lp.logprobs.empty()) fail(ErrorKind::degenerate, "sequence_loss: no tokens in " + lp.id);
  double s = 0.0;
  for (double x : lp.logprobs) s += x;
  return -s / static_cast<double>(lp.logprobs.size());
}

MembershipScore loss_score(const TokenLogProbs& lp) {
  return {lp.id, Attack::loss, -sequence_loss(lp), {{"model_id", lp.model_id}}};
}

MembershipScore ref_score(const TokenLogProbs& target, const TokenLogProbs& reference) {
  if (target.id != reference.id) {
    fail(ErrorKind::invalid_input, "ref_score: id mismatch " + target.id + " vs " + reference.id);
  }
  const double value = sequence_loss(reference) - sequence_loss(target);
  return {target.id, Attack::ref, value, {{"model_id", target.model_id}, {"reference_model", reference.model_id}}};
}

std::size_t zlib_size(std::string_view bytes, int level) {
  uLongf cap = compressBound(static_cast<uLong>(bytes.size()));
  std::vector<Bytef> buf(cap);
  const int rc = compress2(buf.data(), &cap, reinterpret_cast<const Bytef*>(bytes.data()),
                           static_cast<uLong>(bytes.size()), level);
  if (rc != Z_OK) fail(ErrorKind::invalid_input, "zlib compress2 failed with code " + std::to_string(rc));
  return cap;
}

MembershipScore zlib_score(const TokenLogProbs& lp, std::string_view text_bytes) {
  if (text_bytes.empty()) fail(ErrorKind::degenerate, "zlib_score: empty text for " + lp.id);
  const std::size_t c = zlib_size(text_bytes);
  return {lp.id,
          Attack::zlib,
          -sequence_loss(lp) / static_cast<double>(c),
          {{"model_id", lp.model_id}, {"zlib_bytes", c}, {"zlib_level", kZlibLevel}}};
}

MembershipScore nei_score(const TokenLogProbs& orig, std::span<const TokenLogProbs> neighbors) {
  if (neighbors.empty()) fail(ErrorKind::degenerate, "nei_score: no neighbors for " + orig.id);
  double s = 0.0;
  for (const auto& n : neighbors) s += sequence_loss(n);
  const double value = s / static_cast<double>(neighbors.size()) - sequence_loss(orig);
  return {orig.id, Attack::nei, value, {{"model_id", orig.model_id}, {"neighbors", neighbors.size()}}};
}

namespace {

void check_k(double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    fail(ErrorKind::invalid_input, "K must be in (0, 100], got " + jsonl::format_number(k_percent));
  }
}

std::size_t selected_count(double k_percent, std::size_t t) {
  // K * T first: exact for integer K, so multiples of 100 do not round up.
  const double m = std::ceil(k_percent * static_cast<double>(t) / 100.0);
  return std::clamp<std::size_t>(static_cast<std::size_t>(m), 1, t);
}

// Mean of the m smallest values; stable order keeps earlier positions first on ties.
double mean_of_smallest(const std::vector<double>& values, double k_percent) {
  const std::size_t m = selected_count(k_percent, values.size());
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += values[order[i]];
  return s / static_cast<double>(m);
}

}  // namespace

MembershipScore min_k_score(const TokenLogProbs& lp, double k_percent) {
  check_k(k_percent);
  if (lp.logprobs.empty()) fail(ErrorKind::degenerate, "min_k_score: no tokens in " + lp.id);
  return {lp.id, Attack::min_k, mean_of_smallest(lp.logprobs, k_percent),
          {{"model_id", lp.model_id}, {"k_percent", k_percent}}};
}

MembershipScore min_kpp_score(const TokenLogProbs& lp, double k_percent) {
  check_k(k_percent);
  if (lp.logprobs.empty()) fail(ErrorKind::degenerate, "min_kpp_score: no tokens in " + lp.id);
  if (!lp.has_vocab_stats()) {
    fail(ErrorKind::invalid_input, "min_kpp_score: " + lp.id +
                                       " has no vocab_mu/vocab_sigma; regenerate logprobs.jsonl with the model "
                                       "bridge (extract_logprobs) so vocabulary statistics are included");
  }
  const std::size_t t = lp.logprobs.size();
  if (lp.vocab_mu.size() != t || lp.vocab_sigma.size() != t) {
    fail(ErrorKind::invalid_input, "min_kpp_score: vocab statistics of " + lp.id + " do not match token count");
  }
  std::vector<double> normalized(t);
  for (std::size_t i = 0; i < t; ++i) {
    if (!(lp.vocab_sigma[i] > 0.0)) {
      fail(ErrorKind::invalid_input, "min_kpp_score: non-positive sigma at position " + std::to_string(i) + " of " +
                                         lp.id);
    }
    normalized[i] = (lp.logprobs[i] - lp.vocab_mu[i]) / lp.vocab_sigma[i];
  }
  return {lp.id, Attack::min_kpp, mean_of_smallest(normalized, k_percent),
          {{"model_id", lp.model_id}, {"k_percent", k_percent}}};
}

std::vector<std::string> validate(const TokenLogProbs& lp) {
  std::vector<std::string> problems;
  const auto where = [&](const std::string& msg) { problems.push_back(lp.id + ": " + msg); };
  if (lp.id.empty()) problems.push_back("record with empty id");
  if (lp.tokens.empty()) where("no tokens");
  if (lp.logprobs.size() != lp.tokens.size()) where("logprobs length differs from tokens length");
  for (std::size_t i = 0; i < lp.logprobs.size(); ++i) {
    if (!std::isfinite(lp.logprobs[i])) where("non-finite logprob at " + std::to_string(i));
    else if (lp.logprobs[i] > 0.0) where("positive logprob at " + std::to_string(i));
  }
  if (lp.vocab_mu.empty() != lp.vocab_sigma.empty()) where("vocab_mu and vocab_sigma must be given together");
  if (!lp.vocab_mu.empty() && lp.vocab_mu.size() != lp.tokens.size()) where("vocab_mu length differs from tokens");
  if (!lp.vocab_sigma.empty() && lp.vocab_sigma.size() != lp.tokens.size())
    where("vocab_sigma length differs from tokens");
  for (std::size_t i = 0; i < lp.vocab_mu.size(); ++i)
    if (!std::isfinite(lp.vocab_mu[i])) where("non-finite vocab_mu at " + std::to_string(i));
  for (std::size_t i = 0; i < lp.vocab_sigma.size(); ++i)
    if (!(lp.vocab_sigma[i] > 0.0) || !std::isfinite(lp.vocab_sigma[i]))
      where("vocab_sigma not positive at " + std::to_string(i));
  return problems;
}

std::vector<TokenLogProbs> load_logprobs(const std::filesystem::path& path) {
  std::vector<TokenLogProbs> out;
  jsonl::for_each_line(path, [&](const jsonl::Json& j, const jsonl::Where& w) {
    TokenLogProbs lp;
    lp.id = jsonl::get_string(j, "id", w);
    lp.model_id = jsonl::get_string(j, "model_id", w);
    lp.tokens = jsonl::get_strings(j, "tokens", w);
    lp.logprobs = jsonl::get_numbers(j, "logprobs", w);
    lp.vocab_mu = jsonl::get_optional_numbers(j, "vocab_mu", w);
    lp.vocab_sigma = jsonl::get_optional_numbers(j, "vocab_sigma", w);
    out.push_back(std::move(lp));
  });
  return out;
}

void save_logprobs(const std::filesystem::path& path, std::span<const TokenLogProbs> records) {
  jsonl::Writer out(path);
  for (const auto& lp : records) {
    std::string line = "{\"id\":" + jsonl::quote(lp.id) + ",\"model_id\":" + jsonl::quote(lp.model_id) +
                       ",\"tokens\":" + jsonl::Json(lp.tokens).dump() +
                       ",\"logprobs\":" + jsonl::format_array(lp.logprobs);
    line += ",\"vocab_mu\":" + (lp.vocab_mu.empty() ? std::string("null") : jsonl::format_array(lp.vocab_mu));
    line +=
        ",\"vocab_sigma\":" + (lp.vocab_sigma.empty() ? std::string("null") : jsonl::format_array(lp.vocab_sigma));
    out.write_raw(line + "}");
  }
  out.close();
}

void save_scores(const std::filesystem::path& path, std::span<const MembershipScore> scores) {
  jsonl::Writer out(path);
  for (const auto& s : scores) {
    out.write_raw("{\"id\":" + jsonl::quote(s.id) + ",\"attack\":" + jsonl::quote(attack_name(s.attack)) +
                  ",\"value\":" + jsonl::format_number(s.value) + ",\"params\":" + s.params.dump() + "}");
  }
  out.close();
}

std::vector<MembershipScore> load_scores(const std::filesystem::path& path) {
  std::vector<MembershipScore> out;
  jsonl::for_each_line(path, [&](const jsonl::Json& j, const jsonl::Where& w) {
    MembershipScore s;
    s.id = jsonl::get_string(j, "id", w);
    const auto a = parse_attack(jsonl::get_string(j, "attack", w));
    if (!a) fail(ErrorKind::schema, w.str() + ": unknown attack");
    s.attack = *a;
    s.value = jsonl::get_number(j, "value", w);
    if (j.contains("params")) s.params = j.at("params");
    out.push_back(std::move(s));
  });
  return out;
}

}  // namespace smia::signals
