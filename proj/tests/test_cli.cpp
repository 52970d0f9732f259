#include <cstdlib>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "smia/digest.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using smia::testing::read_file;
using smia::testing::scratch;
using smia::testing::write_file;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SMIA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("cli runs the offline pipeline end to end") {
  const auto dir = scratch("cli_all");
  write_file(dir / "small.conf", "n = 4\nn_inf = 4\nembed_dim = 32\nepochs = 1\nlearning_rate = 0.001\n");
  const std::string common = "--work-dir " + quoted(dir) + " --config " + quoted(dir / "small.conf");
  REQUIRE(run("synth-corpus --count 20 --seed 3 " + common) == 0);
  REQUIRE(run("all --stub --seed 3 " + common) == 0);
  const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
  CHECK(report.size() == 9);

  // Flags override the config file; --set overrides it too.
  CHECK(run("infer --n-inf 2 --epsilon 0.9 " + common) == 0);
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.infer.json"));
  CHECK(manifest["config"]["n_inf"] == "2");
  CHECK(manifest["config"]["epsilon"] == "0.9");
  CHECK(manifest["config"]["n"] == "4");
  CHECK(run("score --attack loss,min_k --k-percent 5,50 " + common) == 0);
  CHECK(run("eval --attack loss,min_k --k-percent 5,50 " + common) == 0);
  const auto narrow = nlohmann::json::parse(read_file(dir / "report.json"));
  CHECK(narrow.size() == 3);
  CHECK(narrow.contains("min_k@5"));
  CHECK(run("cost --closed-form --set cost_beta=10 --set cost_n=2 " + common) == 0);
  CHECK(nlohmann::json::parse(read_file(dir / "cost.json"))["item_count"] == 42.0);
  CHECK(run("modify --kind deletion " + common) == 0);
  CHECK(fs::exists(dir / "texts_modified.jsonl"));
}

TEST_CASE("cli replays a manifest bit for bit") {
  const auto dir = scratch("cli_replay");
  write_file(dir / "small.conf", "n = 3\nn_inf = 3\nembed_dim = 16\nepochs = 2\n");
  const std::string common = "--work-dir " + quoted(dir) + " --config " + quoted(dir / "small.conf");
  REQUIRE(run("synth-corpus --count 20 " + common) == 0);
  REQUIRE(run("all " + common) == 0);
  const auto model = smia::sha256_file(dir / "model.bin");
  const auto report = smia::sha256_file(dir / "report.json");
  const auto m = quoted(dir / "manifest.eval.json");
  REQUIRE(run("train --from-manifest " + m) == 0);
  REQUIRE(run("infer --from-manifest " + m) == 0);
  REQUIRE(run("eval --from-manifest " + m) == 0);
  CHECK(smia::sha256_file(dir / "model.bin") == model);
  CHECK(smia::sha256_file(dir / "report.json") == report);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("cli_codes");
  const std::string wd = "--work-dir " + quoted(dir);
  CHECK(run("train " + wd) == 4);
  CHECK(run("score --set unknown_key=1 " + wd) == 2);
  CHECK(run("score --config " + quoted(dir / "nope.conf") + " " + wd) == 2);
  CHECK(run("score --attack loss,telepathy " + wd) == 2);
  write_file(dir / "texts.jsonl", "{\"id\":\"a\"}\n");
  CHECK(run("mask " + wd) == 3);
  CHECK(run("no-such-stage " + wd) != 0);
  CHECK(run("cost " + wd) == 0);
}
