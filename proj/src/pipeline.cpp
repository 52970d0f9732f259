#include "smia/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <unordered_map>

#include "json.hpp"
#include "smia/digest.hpp"
#include "smia/embed.hpp"
#include "smia/error.hpp"
#include "smia/eval.hpp"
#include "smia/jsonl.hpp"
#include "smia/model_io.hpp"
#include "smia/nn.hpp"
#include "smia/perturb.hpp"
#include "smia/rng.hpp"
#include "smia/signals.hpp"
#include "smia/simd/kernels.hpp"
#include "smia/stub_lm.hpp"
#include "smia/text.hpp"
#include "smia/train.hpp"

namespace smia::pipeline {

namespace fs = std::filesystem;
using corpus::TextRecord;
using signals::Attack;
using signals::TokenLogProbs;

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::prepare, "prepare"},   {Stage::mask, "mask"},
    {Stage::fill, "fill"},         {Stage::embed, "embed"},
    {Stage::logprobs, "logprobs"}, {Stage::logprobs_check, "logprobs-check"},
    {Stage::score, "score"},       {Stage::features, "features"},
    {Stage::train, "train"},       {Stage::infer, "infer"},
    {Stage::eval, "eval"},         {Stage::modify, "modify"},
    {Stage::cost, "cost"},         {Stage::all, "all"},
};

std::vector<TextRecord> read_texts(const PipelineConfig& cfg, StageResult& r) {
  const auto p = cfg.path(cfg.texts);
  jsonl::require_file(p, "prepare");
  r.inputs.push_back(p);
  return corpus::load_texts(p);
}

std::vector<perturb::NeighborSet> read_neighbors(const PipelineConfig& cfg, StageResult& r) {
  const auto p = cfg.path(cfg.neighbors);
  jsonl::require_file(p, "fill");
  r.inputs.push_back(p);
  return perturb::load_neighbors(p);
}

std::unordered_map<std::string, TokenLogProbs> index_logprobs(std::vector<TokenLogProbs> v, const fs::path& p) {
  std::unordered_map<std::string, TokenLogProbs> out;
  for (auto& lp : v) {
    auto id = lp.id;
    if (!out.emplace(id, std::move(lp)).second) fail(ErrorKind::schema, p.string() + ": duplicate id " + id);
  }
  return out;
}

std::unordered_map<std::string, TokenLogProbs> read_logprobs(const fs::path& p, std::string_view producer,
                                                             StageResult& r) {
  jsonl::require_file(p, producer);
  r.inputs.push_back(p);
  return index_logprobs(signals::load_logprobs(p), p);
}

std::string logprob_producer(const PipelineConfig& cfg) {
  return cfg.logprob_client == ClientKind::stub ? "logprobs" : "model-bridge extract_logprobs";
}

const TokenLogProbs& lookup(const std::unordered_map<std::string, TokenLogProbs>& m, const std::string& id,
                            const fs::path& file) {
  const auto it = m.find(id);
  if (it == m.end()) fail(ErrorKind::schema, file.string() + ": no record for id " + id);
  return it->second;
}

std::unordered_map<std::string, const perturb::NeighborSet*> index_neighbors(
    const std::vector<perturb::NeighborSet>& sets) {
  std::unordered_map<std::string, const perturb::NeighborSet*> out;
  for (const auto& s : sets) out[s.orig_id] = &s;
  return out;
}

const perturb::NeighborSet& neighbors_of(const std::unordered_map<std::string, const perturb::NeighborSet*>& m,
                                         const std::string& id) {
  const auto it = m.find(id);
  if (it == m.end()) fail(ErrorKind::schema, "no neighbors for " + id + " (re-run stages mask and fill)");
  return *it->second;
}

StageResult stage_prepare(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::prepare;
  const auto in = cfg.path(cfg.raw_texts);
  jsonl::require_file(in, "an external corpus export or `smia synth-corpus`");
  r.inputs.push_back(in);
  auto prepared = corpus::prepare_records(corpus::load_texts(in), cfg.min_words, cfg.max_words);
  const auto out = cfg.path(cfg.texts);
  corpus::save_texts(out, prepared);
  r.outputs.push_back(out);
  r.records = prepared.size();
  r.summary = std::to_string(prepared.size()) + " records kept";
  return r;
}

StageResult stage_mask(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::mask;
  const auto texts = read_texts(cfg, r);
  std::vector<perturb::MaskedText> all;
  for (const auto& t : texts) {
    const auto body = t.rendered();
    const std::size_t k = cfg.k ? cfg.k : perturb::default_mask_count(text::count_words(body));
    auto plans = perturb::mask_plan(t.id, body, cfg.n, k, derive_seed(cfg.seed, "mask/" + t.id));
    for (auto& p : plans) all.push_back(std::move(p));
  }
  const auto out = cfg.path(cfg.masks);
  perturb::save_masks(out, all);
  r.outputs.push_back(out);
  r.records = all.size();
  r.summary = std::to_string(all.size()) + " masked variants";
  return r;
}

std::unique_ptr<perturb::MaskFillClient> make_filler(const PipelineConfig& cfg, StageResult& r,
                                                     std::string_view purpose) {
  if (cfg.fill_client == ClientKind::stub) {
    return std::make_unique<perturb::StubMaskFill>(perturb::default_lexicon(), derive_seed(cfg.seed, purpose));
  }
  const auto p = cfg.path(cfg.fill_responses);
  r.inputs.push_back(p);
  return std::make_unique<perturb::ReplayMaskFill>(p);
}

StageResult stage_fill(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::fill;
  const auto mp = cfg.path(cfg.masks);
  jsonl::require_file(mp, "mask");
  r.inputs.push_back(mp);
  const auto masks = perturb::load_masks(mp);
  auto client = make_filler(cfg, r, "fill");

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<perturb::MaskedText>> groups;
  for (const auto& m : masks) {
    auto [it, inserted] = groups.try_emplace(m.orig_id);
    if (inserted) order.push_back(m.orig_id);
    it->second.push_back(m);
  }
  std::vector<perturb::NeighborSet> sets;
  const ParallelOptions opts{cfg.max_in_flight, 3};
  for (const auto& id : order) sets.push_back(perturb::fill_neighbors(groups[id], *client, opts));
  const auto out = cfg.path(cfg.neighbors);
  perturb::save_neighbors(out, sets);
  r.outputs.push_back(out);
  r.records = masks.size();
  r.summary = std::to_string(masks.size()) + " neighbors via " + client->descriptor().name;
  return r;
}

StageResult stage_embed(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::embed;
  const auto texts = read_texts(cfg, r);
  const auto sets = read_neighbors(cfg, r);
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& t : texts) items.emplace_back(t.id, t.rendered());
  for (const auto& s : sets)
    for (std::size_t i = 0; i < s.neighbors.size(); ++i) items.emplace_back(perturb::neighbor_id(s.orig_id, i), s.neighbors[i]);

  const auto out = cfg.path(cfg.embeddings);
  const ParallelOptions opts{cfg.max_in_flight, 3};
  if (cfg.embed_client == ClientKind::stub) {
    embed::StubEmbedding client(cfg.embed_dim, derive_seed(cfg.seed, "embed"));
    const auto vectors = embed::embed_texts(items, client, opts);
    embed::save_embeddings(out, vectors);
    r.outputs.push_back(out);
  } else {
    // Bridge output is consumed in place; verify coverage and dimension.
    embed::ReplayEmbedding client(out);
    embed::embed_texts(items, client, opts);
    r.inputs.push_back(out);
  }
  r.records = items.size();
  r.summary = std::to_string(items.size()) + " embeddings";
  return r;
}

StageResult stage_logprobs(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::logprobs;
  const auto target_path = cfg.path(cfg.logprobs);
  const auto ref_path = cfg.path(cfg.ref_logprobs);
  if (cfg.logprob_client == ClientKind::bridge_files) {
    jsonl::require_file(target_path, "model-bridge extract_logprobs");
    r.inputs.push_back(target_path);
    if (cfg.wants(Attack::ref)) {
      jsonl::require_file(ref_path, "model-bridge extract_logprobs (reference model)");
      r.inputs.push_back(ref_path);
    }
    r.summary = "bridge files present";
    return r;
  }
  const auto texts = read_texts(cfg, r);
  const auto sets = read_neighbors(cfg, r);

  signals::StubLanguageModel target("stub-target", cfg.stub_bigram_weight);
  signals::StubLanguageModel reference("stub-reference", 0.0);
  for (const auto& t : texts) {
    const auto body = t.rendered();
    if (t.is_member()) target.train(body);
    reference.train(body);
  }
  for (auto* lm : {&target, &reference}) {
    for (const auto& t : texts) lm->add_vocabulary(t.rendered());
    for (const auto& s : sets)
      for (const auto& n : s.neighbors) lm->add_vocabulary(n);
    for (const auto& w : perturb::default_lexicon()) lm->add_vocabulary(w);
    lm->finalize();
  }

  std::vector<TokenLogProbs> tl, rl;
  const auto nb = index_neighbors(sets);
  for (const auto& t : texts) {
    const auto body = t.rendered();
    tl.push_back(target.score(t.id, body));
    rl.push_back(reference.score(t.id, body));
    if (const auto it = nb.find(t.id); it != nb.end()) {
      const auto& s = *it->second;
      for (std::size_t i = 0; i < s.neighbors.size(); ++i)
        tl.push_back(target.score(perturb::neighbor_id(t.id, i), s.neighbors[i]));
    }
  }
  signals::save_logprobs(target_path, tl);
  signals::save_logprobs(ref_path, rl);
  r.outputs = {target_path, ref_path};
  r.records = tl.size();
  r.summary = std::to_string(tl.size()) + " target and " + std::to_string(rl.size()) + " reference records";
  return r;
}

StageResult stage_logprobs_check(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::logprobs_check;
  std::vector<std::string> problems;
  auto check_file = [&](const fs::path& p, const std::vector<std::string>& required) {
    jsonl::require_file(p, logprob_producer(cfg));
    r.inputs.push_back(p);
    std::unordered_map<std::string, int> seen;
    for (const auto& lp : signals::load_logprobs(p)) {
      for (auto& msg : signals::validate(lp)) problems.push_back(p.filename().string() + ": " + msg);
      if (++seen[lp.id] == 2) problems.push_back(p.filename().string() + ": duplicate id " + lp.id);
    }
    for (const auto& id : required)
      if (!seen.count(id)) problems.push_back(p.filename().string() + ": missing record for " + id);
  };

  std::vector<std::string> originals, everything;
  if (fs::exists(cfg.path(cfg.texts))) {
    for (const auto& t : read_texts(cfg, r)) originals.push_back(t.id);
  }
  everything = originals;
  if (fs::exists(cfg.path(cfg.neighbors))) {
    for (const auto& s : read_neighbors(cfg, r))
      for (std::size_t i = 0; i < s.neighbors.size(); ++i) everything.push_back(perturb::neighbor_id(s.orig_id, i));
  }
  check_file(cfg.path(cfg.logprobs), everything);
  if (cfg.wants(Attack::ref)) check_file(cfg.path(cfg.ref_logprobs), originals);

  r.records = problems.size();
  for (std::size_t i = 0; i < problems.size() && i < 50; ++i) std::cerr << "logprobs-check: " << problems[i] << "\n";
  if (!problems.empty()) {
    fail(ErrorKind::schema, "logprobs-check found " + std::to_string(problems.size()) + " violation(s)");
  }
  r.summary = "0 violations";
  return r;
}

std::string variant_key(Attack a, double k_percent) {
  return std::string(signals::attack_name(a)) + "@" + jsonl::format_number(k_percent, 6);
}

StageResult stage_score(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::score;
  const auto texts = read_texts(cfg, r);
  const auto tpath = cfg.path(cfg.logprobs);
  const auto target = read_logprobs(tpath, logprob_producer(cfg), r);
  std::unordered_map<std::string, TokenLogProbs> reference;
  const auto rpath = cfg.path(cfg.ref_logprobs);
  if (cfg.wants(Attack::ref)) reference = read_logprobs(rpath, logprob_producer(cfg), r);
  std::vector<perturb::NeighborSet> sets;
  if (cfg.wants(Attack::nei)) sets = read_neighbors(cfg, r);
  const auto nb = index_neighbors(sets);

  std::vector<signals::MembershipScore> scores;
  for (const auto& t : texts) {
    const auto& lp = lookup(target, t.id, tpath);
    for (Attack a : cfg.attacks) {
      switch (a) {
        case Attack::loss: scores.push_back(signals::loss_score(lp)); break;
        case Attack::ref: scores.push_back(signals::ref_score(lp, lookup(reference, t.id, rpath))); break;
        case Attack::zlib: scores.push_back(signals::zlib_score(lp, t.rendered())); break;
        case Attack::nei: {
          const auto& s = neighbors_of(nb, t.id);
          std::vector<TokenLogProbs> neigh;
          for (std::size_t i = 0; i < s.neighbors.size(); ++i)
            neigh.push_back(lookup(target, perturb::neighbor_id(t.id, i), tpath));
          scores.push_back(signals::nei_score(lp, neigh));
          break;
        }
        case Attack::min_k:
          for (double k : cfg.k_percent) scores.push_back(signals::min_k_score(lp, k));
          break;
        case Attack::min_kpp:
          for (double k : cfg.k_percent) scores.push_back(signals::min_kpp_score(lp, k));
          break;
        case Attack::smia: break;  // produced by `infer`
      }
    }
  }
  const auto out = cfg.path(cfg.scores);
  signals::save_scores(out, scores);
  r.outputs.push_back(out);
  r.records = scores.size();
  r.summary = std::to_string(scores.size()) + " scores";
  return r;
}

StageResult stage_features(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::features;
  const auto texts = read_texts(cfg, r);
  const auto sets = read_neighbors(cfg, r);
  const auto nb = index_neighbors(sets);
  const auto epath = cfg.path(cfg.embeddings);
  jsonl::require_file(epath, cfg.embed_client == ClientKind::stub ? "embed" : "model-bridge embed_batch");
  r.inputs.push_back(epath);
  std::unordered_map<std::string, embed::EmbeddingVector> emb;
  for (auto& v : embed::load_embeddings(epath)) {
    auto id = v.id;
    emb.emplace(std::move(id), std::move(v));
  }
  const auto tpath = cfg.path(cfg.logprobs);
  const auto target = read_logprobs(tpath, logprob_producer(cfg), r);
  auto emb_of = [&](const std::string& id) -> const embed::EmbeddingVector& {
    const auto it = emb.find(id);
    if (it == emb.end()) fail(ErrorKind::schema, epath.string() + ": no embedding for " + id);
    return it->second;
  };

  std::map<corpus::Split, std::vector<nn::FeatureRow>> by_split;
  std::size_t total = 0;
  for (const auto& t : texts) {
    const auto& s = neighbors_of(nb, t.id);
    std::vector<embed::EmbeddingVector> ne;
    std::vector<double> nl;
    for (std::size_t i = 0; i < s.neighbors.size(); ++i) {
      const auto nid = perturb::neighbor_id(t.id, i);
      ne.push_back(emb_of(nid));
      nl.push_back(signals::sequence_loss(lookup(target, nid, tpath)));
    }
    auto rows = nn::build_feature_rows(emb_of(t.id), ne, signals::sequence_loss(lookup(target, t.id, tpath)), nl,
                                       t.is_member() ? 1 : 0);
    total += rows.size();
    auto& bucket = by_split[t.split];
    for (auto& row : rows) bucket.push_back(std::move(row));
  }
  for (auto split : {corpus::Split::train, corpus::Split::validation, corpus::Split::test}) {
    const auto out = cfg.features_path(corpus::to_string(split));
    nn::save_features(out, by_split[split]);
    r.outputs.push_back(out);
  }
  r.records = total;
  r.summary = std::to_string(total) + " feature rows";
  return r;
}

std::vector<nn::FeatureRow> read_features(const PipelineConfig& cfg, std::string_view split, StageResult& r) {
  const auto p = cfg.features_path(split);
  jsonl::require_file(p, "features");
  r.inputs.push_back(p);
  return nn::load_features(p);
}

StageResult stage_train(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::train;
  auto groups = nn::group_by_original(read_features(cfg, "train", r));
  const auto validation = read_features(cfg, "validation", r);
  std::vector<nn::OriginalGroup> members, nonmembers;
  for (auto& g : groups) (g.label == 1 ? members : nonmembers).push_back(std::move(g));

  auto result = nn::mlp_train(members, nonmembers, validation, cfg.train);
  const auto model_path = cfg.path(cfg.model);
  nn::save_model(model_path, result.model);
  const auto log_path = cfg.path(cfg.train_log);
  jsonl::Writer log(log_path);
  for (const auto& s : result.steps) {
    log.write_raw("{\"epoch\":" + std::to_string(s.epoch) + ",\"step\":" + std::to_string(s.step) +
                  ",\"member_ids\":" + jsonl::Json(s.member_ids).dump() +
                  ",\"nonmember_ids\":" + jsonl::Json(s.nonmember_ids).dump() + ",\"members\":" +
                  std::to_string(s.member_ids.size()) + ",\"nonmembers\":" + std::to_string(s.nonmember_ids.size()) +
                  ",\"rows\":" + std::to_string(s.rows) + ",\"loss\":" + jsonl::format_number(s.loss) + "}");
  }
  log.close();
  r.outputs = {model_path, log_path};
  r.records = result.steps.size();
  const auto& best = result.history[static_cast<std::size_t>(result.model.epoch_of_best_validation - 1)];
  r.summary = "best epoch " + std::to_string(best.epoch) + " (validation loss " +
              jsonl::format_number(best.validation_loss, 6) + ")";
  return r;
}

StageResult stage_infer(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::infer;
  const auto model_path = cfg.path(cfg.model);
  jsonl::require_file(model_path, "train");
  r.inputs.push_back(model_path);
  const auto model = nn::load_model(model_path);
  const auto groups = nn::group_by_original(read_features(cfg, "test", r));
  std::vector<signals::MembershipScore> scores;
  std::size_t rows_used = 0;
  for (const auto& g : groups) {
    if (g.rows.size() < cfg.n_inf) {
      fail(ErrorKind::invalid_input, g.orig_id + " has " + std::to_string(g.rows.size()) + " feature rows, n_inf is " +
                                         std::to_string(cfg.n_inf));
    }
    const std::span<const nn::FeatureRow> rows(g.rows.data(), cfg.n_inf);
    const double mu = nn::smia_score(model, rows);
    rows_used += rows.size();
    scores.push_back({g.orig_id,
                      Attack::smia,
                      mu,
                      {{"n_inf", cfg.n_inf},
                       {"rows_used", rows.size()},
                       {"epsilon", cfg.epsilon},
                       {"member", nn::classify(mu, cfg.epsilon)}}});
  }
  const auto out = cfg.path(cfg.smia_scores);
  signals::save_scores(out, scores);
  r.outputs.push_back(out);
  r.records = rows_used;
  r.summary = std::to_string(scores.size()) + " texts scored from " + std::to_string(rows_used) + " rows";
  return r;
}

StageResult stage_eval(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::eval;
  const auto texts = read_texts(cfg, r);
  std::unordered_map<std::string, const TextRecord*> test;
  for (const auto& t : texts)
    if (t.split == corpus::Split::test) test[t.id] = &t;

  std::vector<std::pair<std::string, eval::ScoredPopulation>> pops;
  std::unordered_map<std::string, std::size_t> slot;
  auto key_of = [&](const signals::MembershipScore& s) -> std::string {
    if (s.attack == Attack::min_k || s.attack == Attack::min_kpp)
      return variant_key(s.attack, s.params.value("k_percent", 0.0));
    return std::string(signals::attack_name(s.attack));
  };
  for (Attack a : cfg.attacks) {
    if (a == Attack::min_k || a == Attack::min_kpp) {
      for (double k : cfg.k_percent) {
        slot[variant_key(a, k)] = pops.size();
        pops.emplace_back(variant_key(a, k), eval::ScoredPopulation{{}, {}, variant_key(a, k)});
      }
    } else {
      const std::string key(signals::attack_name(a));
      slot[key] = pops.size();
      pops.emplace_back(key, eval::ScoredPopulation{{}, {}, key});
    }
  }
  auto absorb = [&](const fs::path& p, std::string_view producer) {
    jsonl::require_file(p, producer);
    r.inputs.push_back(p);
    for (const auto& s : signals::load_scores(p)) {
      const auto t = test.find(s.id);
      const auto k = slot.find(key_of(s));
      if (t == test.end() || k == slot.end()) continue;
      auto& pop = pops[k->second].second;
      (t->second->is_member() ? pop.member_scores : pop.nonmember_scores).push_back(s.value);
    }
  };
  bool baselines = false;
  for (Attack a : cfg.attacks) baselines |= a != Attack::smia;
  if (baselines) absorb(cfg.path(cfg.scores), "score");
  if (cfg.wants(Attack::smia)) absorb(cfg.path(cfg.smia_scores), "infer");

  std::vector<std::pair<std::string, eval::RocReport>> reports;
  for (const auto& [key, pop] : pops) reports.emplace_back(key, eval::evaluate(pop));
  const auto report_path = cfg.path(cfg.report);
  const auto roc_path = cfg.path(cfg.roc);
  {
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    out << eval::render_report_json(reports);
    std::ofstream roc(roc_path, std::ios::binary | std::ios::trunc);
    roc << eval::render_roc_csv(reports);
    if (!out || !roc) fail(ErrorKind::config, "cannot write evaluation outputs in " + cfg.work_dir.string());
  }
  r.outputs = {report_path, roc_path};
  r.records = reports.size();
  std::string summary;
  for (const auto& [key, rep] : reports) summary += key + " auc=" + jsonl::format_number(rep.auc, 4) + " ";
  r.summary = summary;
  return r;
}

StageResult stage_modify(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::modify;
  const auto kind = corpus::parse_modification(cfg.modify_kind);
  if (!kind) fail(ErrorKind::config, "modify_kind must be duplication, deletion or addition");
  auto texts = read_texts(cfg, r);
  auto filler = make_filler(cfg, r, "modify-fill");
  std::size_t changed = 0;
  for (auto& t : texts) {
    if (!t.is_member() || t.split != corpus::Split::test) continue;
    t = corpus::modify(t, *kind, *filler, derive_seed(cfg.seed, "modify/" + t.id));
    ++changed;
  }
  const auto out = cfg.path(cfg.modified_texts);
  corpus::save_texts(out, texts);
  r.outputs.push_back(out);
  r.records = changed;
  r.summary = std::to_string(changed) + " test members modified (" + cfg.modify_kind + ")";
  return r;
}

StageResult stage_cost(const PipelineConfig& cfg) {
  StageResult r;
  r.stage = Stage::cost;
  const auto e = cost_estimate(cfg.cost, cfg.cost_rule);
  nlohmann::ordered_json j;
  j["rule"] = cfg.cost_rule == ItemCountRule::worked_example ? "worked_example" : "closed_form";
  j["item_count"] = e.item_count;
  j["total_cost"] = e.total_cost;
  j["embedding_char_cost"] = e.embedding_char_cost;
  const auto out = cfg.path(cfg.cost_report);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f << j.dump(2) << "\n";
  r.outputs.push_back(out);
  r.records = static_cast<std::size_t>(e.item_count);
  r.summary = j.dump();
  return r;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const PipelineConfig& cfg, const StageResult& r) {
  nlohmann::ordered_json m;
  m["stage"] = stage_name(r.stage);
  m["timestamp"] = utc_timestamp();
  m["config_hash"] = cfg.digest();
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.to_entries()) conf[k] = v;
  m["config"] = conf;
  m["seeds"] = {{"seed", cfg.seed}, {"train_seed", cfg.train.seed}};
  m["isa"] = simd::isa_name(simd::active_isa());
  auto digests = [](const std::vector<fs::path>& files) {
    nlohmann::ordered_json d = nlohmann::ordered_json::object();
    for (const auto& f : files) d[f.filename().string()] = sha256_file(f);
    return d;
  };
  m["inputs"] = digests(r.inputs);
  m["outputs"] = digests(r.outputs);
  m["records"] = r.records;
  const auto p = manifest_path(cfg, r.stage);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << m.dump(2) << "\n";
  if (!out) fail(ErrorKind::config, "cannot write manifest " + p.string());
}

StageResult run_one(const PipelineConfig& cfg, Stage s) {
  switch (s) {
    case Stage::prepare: return stage_prepare(cfg);
    case Stage::mask: return stage_mask(cfg);
    case Stage::fill: return stage_fill(cfg);
    case Stage::embed: return stage_embed(cfg);
    case Stage::logprobs: return stage_logprobs(cfg);
    case Stage::logprobs_check: return stage_logprobs_check(cfg);
    case Stage::score: return stage_score(cfg);
    case Stage::features: return stage_features(cfg);
    case Stage::train: return stage_train(cfg);
    case Stage::infer: return stage_infer(cfg);
    case Stage::eval: return stage_eval(cfg);
    case Stage::modify: return stage_modify(cfg);
    case Stage::cost: return stage_cost(cfg);
    case Stage::all: break;
  }
  fail(ErrorKind::config, "stage 'all' cannot be run as a single stage");
}

}  // namespace

std::string_view stage_name(Stage s) {
  for (const auto& [st, name] : kStageNames)
    if (st == s) return name;
  return "all";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (const auto& [st, name] : kStageNames)
    if (name == s) return st;
  return std::nullopt;
}

const std::vector<Stage>& pipeline_order() {
  static const std::vector<Stage> order = {Stage::prepare,        Stage::mask,  Stage::fill,     Stage::embed,
                                           Stage::logprobs,       Stage::logprobs_check, Stage::score,
                                           Stage::features,       Stage::train, Stage::infer,    Stage::eval};
  return order;
}

fs::path manifest_path(const PipelineConfig& cfg, Stage stage) {
  return cfg.work_dir / ("manifest." + std::string(stage_name(stage)) + ".json");
}

std::vector<StageResult> run_pipeline(const PipelineConfig& cfg, Stage stage) {
  fs::create_directories(cfg.work_dir);
  std::vector<StageResult> results;
  const std::vector<Stage> stages = stage == Stage::all ? pipeline_order() : std::vector<Stage>{stage};
  for (Stage s : stages) {
    results.push_back(run_one(cfg, s));
    write_manifest(cfg, results.back());
  }
  return results;
}

Entries load_manifest_config(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::config, "cannot read manifest " + manifest.string());
  try {
    const auto j = nlohmann::json::parse(in);
    Entries e;
    for (const auto& [k, v] : j.at("config").items()) e[k] = v.get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::config, manifest.string() + ": not a manifest: " + ex.what());
  }
}

std::vector<TextRecord> synthetic_corpus(std::size_t count, std::uint64_t seed, std::size_t min_words,
                                         std::size_t max_words) {
  const auto& lex = perturb::default_lexicon();
  SplitMix64 rng(seed);
  const std::size_t per_class[2] = {(count + 1) / 2, count / 2};
  std::vector<TextRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    TextRecord t;
    char id[32];
    std::snprintf(id, sizeof id, "doc-%05zu", i);
    t.id = id;
    t.title = "Article " + std::to_string(i);
    const std::size_t words = min_words + rng.uniform_index(max_words + 20 - min_words + 1);
    std::vector<std::string> body;
    for (std::size_t w = 0; w < words; ++w) body.push_back(lex[rng.uniform_index(lex.size())]);
    t.body = text::join_words(body);
    const std::size_t cls = i % 2;
    t.label = cls == 0 ? corpus::Label::member : corpus::Label::nonmember;
    const std::size_t c = i / 2;
    const std::size_t m = per_class[cls];
    t.split = c * 10 < 6 * m ? corpus::Split::train : (c * 10 < 8 * m ? corpus::Split::validation : corpus::Split::test);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace smia::pipeline
