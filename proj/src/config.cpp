#include "smia/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "smia/digest.hpp"
#include "smia/error.hpp"
#include "smia/jsonl.hpp"

namespace smia::pipeline {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  fail(ErrorKind::config, "config " + std::string(key) + "=" + std::string(value) + ": expected " +
                              std::string(expected));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(std::string(v), &used);
    if (used != v.size()) bad(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad(key, v, "a number");
  }
}

ClientKind to_client(std::string_view key, std::string_view v) {
  if (v == "stub") return ClientKind::stub;
  if (v == "bridge-files") return ClientKind::bridge_files;
  bad(key, v, "stub or bridge-files");
}

std::string client_name(ClientKind c) { return c == ClientKind::stub ? "stub" : "bridge-files"; }

std::string num(double v) { return jsonl::format_number(v); }

}  // namespace

Entries parse_config_text(std::string_view text, std::string_view origin) {
  Entries out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::config, std::string(origin) + ":" + std::to_string(no) + ": expected key = value");
    }
    out[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

Entries parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::filesystem::path PipelineConfig::features_path(std::string_view split) const {
  return path(features_prefix + "_" + std::string(split) + ".jsonl");
}

bool PipelineConfig::wants(signals::Attack a) const {
  for (auto x : attacks)
    if (x == a) return true;
  return false;
}

PipelineConfig PipelineConfig::from_entries(const Entries& entries) {
  PipelineConfig c;
  for (const auto& [key, value] : entries) {
    const std::string_view v = value;
    auto size = [&] { return static_cast<std::size_t>(to_u64(key, v)); };
    if (key == "work_dir") c.work_dir = value;
    else if (key == "raw_texts") c.raw_texts = value;
    else if (key == "texts") c.texts = value;
    else if (key == "masks") c.masks = value;
    else if (key == "fill_responses") c.fill_responses = value;
    else if (key == "neighbors") c.neighbors = value;
    else if (key == "embeddings") c.embeddings = value;
    else if (key == "logprobs") c.logprobs = value;
    else if (key == "ref_logprobs") c.ref_logprobs = value;
    else if (key == "scores") c.scores = value;
    else if (key == "features_prefix") c.features_prefix = value;
    else if (key == "model") c.model = value;
    else if (key == "train_log") c.train_log = value;
    else if (key == "smia_scores") c.smia_scores = value;
    else if (key == "report") c.report = value;
    else if (key == "roc") c.roc = value;
    else if (key == "modified_texts") c.modified_texts = value;
    else if (key == "cost_report") c.cost_report = value;
    else if (key == "min_words") c.min_words = size();
    else if (key == "max_words") c.max_words = size();
    else if (key == "n") c.n = size();
    else if (key == "k") c.k = size();
    else if (key == "n_inf") c.n_inf = size();
    else if (key == "k_percent") {
      c.k_percent.clear();
      for (const auto& p : split_list(v)) {
        const double kp = to_double(key, p);
        if (!(kp > 0.0 && kp <= 100.0)) bad(key, v, "percentages in (0, 100]");
        c.k_percent.push_back(kp);
      }
      if (c.k_percent.empty()) bad(key, v, "at least one percentage");
    } else if (key == "attacks") {
      c.attacks.clear();
      for (const auto& p : split_list(v)) {
        const auto a = signals::parse_attack(p);
        if (!a) bad(key, p, "one of loss, ref, zlib, nei, min_k, min_kpp, smia");
        if (!c.wants(*a)) c.attacks.push_back(*a);
      }
      if (c.attacks.empty()) bad(key, v, "at least one attack");
    } else if (key == "epsilon") c.epsilon = to_double(key, v);
    else if (key == "seed") c.seed = to_u64(key, v);
    else if (key == "embed_dim") c.embed_dim = size();
    else if (key == "max_in_flight") c.max_in_flight = size();
    else if (key == "epochs") c.train.epochs = static_cast<int>(to_u64(key, v));
    else if (key == "learning_rate") c.train.learning_rate = to_double(key, v);
    else if (key == "batch_originals") c.train.batch_originals = size();
    else if (key == "dropout") c.train.dropout = to_double(key, v);
    else if (key == "adam_beta1") c.train.beta1 = to_double(key, v);
    else if (key == "adam_beta2") c.train.beta2 = to_double(key, v);
    else if (key == "adam_epsilon") c.train.epsilon = to_double(key, v);
    else if (key == "fill_client") c.fill_client = to_client(key, v);
    else if (key == "embed_client") c.embed_client = to_client(key, v);
    else if (key == "logprob_client") c.logprob_client = to_client(key, v);
    else if (key == "stub_bigram_weight") c.stub_bigram_weight = to_double(key, v);
    else if (key == "modify_kind") c.modify_kind = value;
    else if (key == "cost_beta") c.cost.beta = to_double(key, v);
    else if (key == "cost_n") c.cost.n = to_double(key, v);
    else if (key == "cost_neighbor") c.cost.cost_neighbor = to_double(key, v);
    else if (key == "cost_embedding") c.cost.cost_embedding = to_double(key, v);
    else if (key == "cost_target") c.cost.cost_target = to_double(key, v);
    else if (key == "cost_avg_chars") c.cost.avg_chars = to_double(key, v);
    else if (key == "cost_price_per_char") c.cost.price_per_char = to_double(key, v);
    else if (key == "cost_rule") {
      if (v == "worked_example") c.cost_rule = ItemCountRule::worked_example;
      else if (v == "closed_form") c.cost_rule = ItemCountRule::closed_form;
      else bad(key, v, "worked_example or closed_form");
    } else {
      fail(ErrorKind::config, "unknown config key: " + key);
    }
  }
  c.train.neighbors_per_original = c.n;
  c.train.seed = c.seed;
  if (c.min_words > c.max_words) fail(ErrorKind::config, "min_words exceeds max_words");
  if (c.n == 0) fail(ErrorKind::config, "n must be at least 1");
  if (c.n_inf == 0 || c.n_inf > c.n) fail(ErrorKind::config, "n_inf must be in [1, n] when reusing neighbors");
  if (c.embed_dim < 2) fail(ErrorKind::config, "embed_dim must be at least 2");
  if (c.train.batch_originals < 2 || c.train.batch_originals % 2) fail(ErrorKind::config, "batch_originals must be even");
  if (c.max_in_flight == 0) fail(ErrorKind::config, "max_in_flight must be positive");
  return c;
}

Entries PipelineConfig::to_entries() const {
  Entries e;
  e["work_dir"] = work_dir.string();
  e["raw_texts"] = raw_texts;
  e["texts"] = texts;
  e["masks"] = masks;
  e["fill_responses"] = fill_responses;
  e["neighbors"] = neighbors;
  e["embeddings"] = embeddings;
  e["logprobs"] = logprobs;
  e["ref_logprobs"] = ref_logprobs;
  e["scores"] = scores;
  e["features_prefix"] = features_prefix;
  e["model"] = model;
  e["train_log"] = train_log;
  e["smia_scores"] = smia_scores;
  e["report"] = report;
  e["roc"] = roc;
  e["modified_texts"] = modified_texts;
  e["cost_report"] = cost_report;
  e["min_words"] = std::to_string(min_words);
  e["max_words"] = std::to_string(max_words);
  e["n"] = std::to_string(n);
  e["k"] = std::to_string(k);
  e["n_inf"] = std::to_string(n_inf);
  std::string kp;
  for (std::size_t i = 0; i < k_percent.size(); ++i) kp += (i ? "," : "") + num(k_percent[i]);
  e["k_percent"] = kp;
  std::string at;
  for (std::size_t i = 0; i < attacks.size(); ++i) at += (i ? "," : "") + std::string(signals::attack_name(attacks[i]));
  e["attacks"] = at;
  e["epsilon"] = num(epsilon);
  e["seed"] = std::to_string(seed);
  e["embed_dim"] = std::to_string(embed_dim);
  e["max_in_flight"] = std::to_string(max_in_flight);
  e["epochs"] = std::to_string(train.epochs);
  e["learning_rate"] = num(train.learning_rate);
  e["batch_originals"] = std::to_string(train.batch_originals);
  e["dropout"] = num(train.dropout);
  e["adam_beta1"] = num(train.beta1);
  e["adam_beta2"] = num(train.beta2);
  e["adam_epsilon"] = num(train.epsilon);
  e["fill_client"] = client_name(fill_client);
  e["embed_client"] = client_name(embed_client);
  e["logprob_client"] = client_name(logprob_client);
  e["stub_bigram_weight"] = num(stub_bigram_weight);
  e["modify_kind"] = modify_kind;
  e["cost_beta"] = num(cost.beta);
  e["cost_n"] = num(cost.n);
  e["cost_neighbor"] = num(cost.cost_neighbor);
  e["cost_embedding"] = num(cost.cost_embedding);
  e["cost_target"] = num(cost.cost_target);
  e["cost_avg_chars"] = num(cost.avg_chars);
  e["cost_price_per_char"] = num(cost.price_per_char);
  e["cost_rule"] = cost_rule == ItemCountRule::worked_example ? "worked_example" : "closed_form";
  return e;
}

std::string PipelineConfig::digest() const {
  std::string canon;
  for (const auto& [k, v] : to_entries()) canon += k + "=" + v + "\n";
  return sha256_hex(canon);
}

}  // namespace smia::pipeline
