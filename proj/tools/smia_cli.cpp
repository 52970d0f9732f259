#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smia/corpus.hpp"
#include "smia/error.hpp"
#include "smia/pipeline.hpp"

namespace {

using smia::ErrorKind;
using namespace smia::pipeline;

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kSchema = 3, kUpstream = 4 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return kConfig;
    case ErrorKind::schema: return kSchema;
    case ErrorKind::upstream_missing: return kUpstream;
    default: return kFailure;
  }
}

struct Flags {
  std::string config;
  std::string from_manifest;
  std::string work_dir;
  std::string seed;
  std::string attacks;
  std::string k_percent;
  std::string n_inf;
  std::string epsilon;
  bool stub = false;
  bool closed_form = false;
  std::string kind;
  std::vector<std::string> sets;
  std::size_t count = 100;
};

// Manifest < config file < --set < dedicated flags.
PipelineConfig resolve(const Flags& f) {
  Entries e;
  if (!f.from_manifest.empty()) e = load_manifest_config(f.from_manifest);
  if (!f.config.empty())
    for (auto& [k, v] : parse_config_file(f.config)) e[k] = v;
  for (const auto& s : f.sets) {
    for (auto& [k, v] : parse_config_text(s, "--set")) e[k] = v;
  }
  if (!f.work_dir.empty()) e["work_dir"] = f.work_dir;
  if (!f.seed.empty()) e["seed"] = f.seed;
  if (!f.attacks.empty()) e["attacks"] = f.attacks;
  if (!f.k_percent.empty()) e["k_percent"] = f.k_percent;
  if (!f.n_inf.empty()) e["n_inf"] = f.n_inf;
  if (!f.epsilon.empty()) e["epsilon"] = f.epsilon;
  if (f.stub) e["fill_client"] = e["embed_client"] = e["logprob_client"] = "stub";
  if (f.closed_form) e["cost_rule"] = "closed_form";
  if (!f.kind.empty()) e["modify_kind"] = f.kind;
  return PipelineConfig::from_entries(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SMIA membership inference toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "key = value configuration file");
  app.add_option("--from-manifest", f.from_manifest, "replay the configuration recorded in a manifest");
  app.add_option("--work-dir", f.work_dir, "directory holding every artifact");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--attack", f.attacks, "attacks to run: loss,ref,zlib,nei,min_k,min_kpp,smia");
  app.add_option("--k-percent", f.k_percent, "Min-K / Min-K++ percentages, comma separated");
  app.add_option("--n-inf", f.n_inf, "neighbors consumed per text at inference");
  app.add_option("--epsilon", f.epsilon, "membership threshold on the SMIA score");
  app.add_flag("--stub", f.stub, "force the offline stub clients");
  app.add_option("--set", f.sets, "override one configuration key (key=value)");

  std::vector<std::pair<CLI::App*, Stage>> stages;
  for (Stage s : {Stage::prepare, Stage::mask, Stage::fill, Stage::embed, Stage::logprobs, Stage::logprobs_check,
                  Stage::score, Stage::features, Stage::train, Stage::infer, Stage::eval, Stage::modify, Stage::cost,
                  Stage::all}) {
    auto* sub = app.add_subcommand(std::string(stage_name(s)), "run stage " + std::string(stage_name(s)));
    if (s == Stage::cost) sub->add_flag("--closed-form", f.closed_form, "count items as 2(n*beta + 1)");
    if (s == Stage::modify) sub->add_option("--kind", f.kind, "duplication, deletion or addition");
    stages.emplace_back(sub, s);
  }
  auto* synth = app.add_subcommand("synth-corpus", "write a synthetic raw_texts.jsonl for offline runs");
  synth->add_option("--count", f.count, "number of texts");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(f);
    if (synth->parsed()) {
      std::filesystem::create_directories(cfg.work_dir);
      const auto out = cfg.path(cfg.raw_texts);
      smia::corpus::save_texts(out, synthetic_corpus(f.count, cfg.seed, cfg.min_words, cfg.max_words));
      std::cout << "synth-corpus: " << f.count << " texts -> " << out.string() << "\n";
      return kOk;
    }
    for (const auto& [sub, stage] : stages) {
      if (!sub->parsed()) continue;
      for (const auto& r : run_pipeline(cfg, stage)) {
        std::cout << stage_name(r.stage) << ": " << r.summary << "\n";
      }
    }
    return kOk;
  } catch (const smia::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
