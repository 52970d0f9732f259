#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "smia/error.hpp"
#include "smia/signals.hpp"
#include "smia/stub_lm.hpp"
#include "smia/text.hpp"
#include "support.hpp"

using namespace smia;
using namespace smia::signals;

namespace {

TokenLogProbs lp_of(std::vector<double> v, std::string id = "r") {
  TokenLogProbs lp;
  lp.id = std::move(id);
  lp.model_id = "m";
  for (std::size_t i = 0; i < v.size(); ++i) lp.tokens.push_back("t" + std::to_string(i));
  lp.logprobs = std::move(v);
  return lp;
}

TokenLogProbs with_stats(TokenLogProbs lp, std::vector<double> mu, std::vector<double> sigma) {
  lp.vocab_mu = std::move(mu);
  lp.vocab_sigma = std::move(sigma);
  return lp;
}

TokenLogProbs random_lp(std::mt19937_64& g, std::size_t t) {
  std::exponential_distribution<double> nll(0.5);
  std::normal_distribution<double> mu(-7.0, 1.0);
  std::uniform_real_distribution<double> sd(0.3, 2.0);
  TokenLogProbs lp = lp_of({});
  for (std::size_t i = 0; i < t; ++i) {
    lp.tokens.push_back("t");
    lp.logprobs.push_back(-nll(g));
    lp.vocab_mu.push_back(mu(g));
    lp.vocab_sigma.push_back(sd(g));
  }
  return lp;
}

}  // namespace

TEST_CASE("sequence_loss") {
  CHECK(sequence_loss(lp_of({-2.0, -2.0, -2.0})) == 2.0);
  CHECK(sequence_loss(lp_of({-1.0, -3.0})) == 2.0);
  CHECK(testing::error_kind_of([] { sequence_loss(lp_of({})); }) == ErrorKind::degenerate);
}

TEST_CASE("loss score orientation") {
  CHECK(loss_score(lp_of({-2.0})).value == -2.0);
  CHECK(loss_score(lp_of({-1.0})).value > loss_score(lp_of({-3.0})).value);
  CHECK_THROWS(loss_score(lp_of({})));
}

TEST_CASE("reference calibration") {
  CHECK(ref_score(lp_of({-1.5}), lp_of({-2.0})).value == 0.5);
  CHECK(ref_score(lp_of({-2.0}), lp_of({-2.0})).value == 0.0);
  CHECK(ref_score(lp_of({-2.5}), lp_of({-2.0})).value == -0.5);
  CHECK_THROWS(ref_score(lp_of({-1.0}, "a"), lp_of({-1.0}, "b")));
}

TEST_CASE("zlib calibration") {
  // zlib.compress(b"a" * 1000, 6) is 17 bytes.
  const std::string as(1000, 'a');
  CHECK(zlib_size(as) == 17);
  CHECK(zlib_size("Alan Turing\n\nwas a pioneer of theoretical computer science") == 65);
  const auto s = zlib_score(lp_of({-2.0}), as);
  CHECK(s.value == -2.0 / 17.0);
  CHECK(s.params["zlib_bytes"] == 17);
  CHECK(-2.0 / 100.0 == -0.02);
  CHECK_THROWS(zlib_score(lp_of({-2.0}), ""));
}

TEST_CASE("neighborhood comparison") {
  const std::vector<TokenLogProbs> same = {lp_of({-1.0}), lp_of({-1.0})};
  CHECK(nei_score(lp_of({-1.0}), same).value == 0.0);
  const std::vector<TokenLogProbs> harder = {lp_of({-2.0}), lp_of({-3.0})};
  CHECK(nei_score(lp_of({-1.0}), harder).value == 1.5);
  CHECK_THROWS(nei_score(lp_of({-1.0}), {}));
}

TEST_CASE("min-k examples") {
  const auto lp = lp_of({-1, -2, -3, -4});
  CHECK(min_k_score(lp, 50).value == -3.5);
  CHECK(min_k_score(lp, 100).value == -2.5);
  CHECK(min_k_score(lp, 100).value == -sequence_loss(lp));
  CHECK(min_k_score(lp, 1).value == -4.0);
  CHECK(min_k_score(lp, 25).value == -4.0);
  CHECK(min_k_score(lp, 26).value == -3.5);
  CHECK_THROWS(min_k_score(lp, 0));
  CHECK_THROWS(min_k_score(lp, 101));
  CHECK_THROWS(min_k_score(lp_of({}), 10));
}

TEST_CASE("min-k matches a sort-and-average oracle") {
  std::mt19937_64 g(1);
  std::uniform_int_distribution<std::size_t> len(1, 120);
  for (int r = 0; r < 300; ++r) {
    auto lp = random_lp(g, len(g));
    for (int k : {1, 5, 10, 20, 33, 50, 100}) {
      auto v = lp.logprobs;
      std::sort(v.begin(), v.end());
      const std::size_t m = std::max<std::size_t>(1, (static_cast<std::size_t>(k) * v.size() + 99) / 100);
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += v[i];
      REQUIRE(min_k_score(lp, k).value == s / static_cast<double>(m));
    }
  }
}

TEST_CASE("min-k is non-decreasing in K") {
  std::mt19937_64 g(2);
  for (int r = 0; r < 100; ++r) {
    const auto lp = random_lp(g, 1 + r);
    double prev = -INFINITY;
    for (int k = 1; k <= 100; k += (k == 1 ? 9 : 10)) {
      const double v = min_k_score(lp, k).value;
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("min-k++ examples") {
  const auto lp = lp_of({-1, -2, -3, -4});
  const auto unit = with_stats(lp, {0, 0, 0, 0}, {1, 1, 1, 1});
  for (double k : {1.0, 25.0, 50.0, 100.0}) CHECK(min_kpp_score(unit, k).value == min_k_score(lp, k).value);
  CHECK(min_kpp_score(with_stats(lp_of({-2}), {-3}, {2}), 100).value == 0.5);

  std::mt19937_64 g(3);
  for (int r = 0; r < 50; ++r) {
    const auto base = random_lp(g, 40);
    auto moved = base;
    const double c = std::uniform_real_distribution<double>(-5, 5)(g);
    for (std::size_t i = 0; i < moved.logprobs.size(); ++i) {
      moved.logprobs[i] += c;
      moved.vocab_mu[i] += c;
    }
    CHECK(std::abs(min_kpp_score(moved, 20).value - min_kpp_score(base, 20).value) <= 1e-12);
  }
}

TEST_CASE("min-k++ input errors") {
  CHECK(testing::error_kind_of([] { min_kpp_score(lp_of({-1}), 10); }) == ErrorKind::invalid_input);
  CHECK_THROWS(min_kpp_score(with_stats(lp_of({-1, -2}), {0}, {1}), 10));
  CHECK_THROWS(min_kpp_score(with_stats(lp_of({-1}), {0}, {0}), 10));
}

TEST_CASE("raising a text's logprobs never lowers any score") {
  std::mt19937_64 g(4);
  for (int r = 0; r < 50; ++r) {
    const auto base = random_lp(g, 30);
    auto easier = base;
    for (auto& x : easier.logprobs) x += 0.25;
    const auto reference = random_lp(g, 30);
    auto ref_b = reference, ref_e = reference;
    ref_b.id = base.id;
    ref_e.id = easier.id;
    const std::vector<TokenLogProbs> neigh = {random_lp(g, 30), random_lp(g, 30)};
    CHECK(loss_score(easier).value >= loss_score(base).value);
    CHECK(ref_score(easier, ref_e).value >= ref_score(base, ref_b).value);
    CHECK(zlib_score(easier, "same bytes").value >= zlib_score(base, "same bytes").value);
    CHECK(nei_score(easier, neigh).value >= nei_score(base, neigh).value);
    CHECK(min_k_score(easier, 20).value >= min_k_score(base, 20).value);
    CHECK(min_kpp_score(easier, 20).value >= min_kpp_score(base, 20).value);
  }
}

TEST_CASE("validate reports contract violations") {
  CHECK(validate(with_stats(lp_of({-1, -2}), {-5, -5}, {1, 1})).empty());
  CHECK(validate(lp_of({-1, -2})).empty());
  CHECK_FALSE(validate(lp_of({-1, 0.5})).empty());
  CHECK_FALSE(validate(lp_of({-1, NAN})).empty());
  CHECK_FALSE(validate(with_stats(lp_of({-1, -2}), {-5}, {1})).empty());
  CHECK_FALSE(validate(with_stats(lp_of({-1, -2}), {-5, -5}, {1, 0})).empty());
  auto mismatch = lp_of({-1, -2});
  mismatch.tokens.pop_back();
  CHECK_FALSE(validate(mismatch).empty());
  CHECK_FALSE(validate(lp_of({})).empty());
}

TEST_CASE("logprobs and scores files round trip") {
  const auto dir = testing::scratch("signals");
  const std::vector<TokenLogProbs> recs = {with_stats(lp_of({-0.1, -2.75}, "a"), {-4, -5}, {1.5, 2}),
                                           lp_of({-3.0}, "b")};
  save_logprobs(dir / "lp.jsonl", recs);
  const auto back = load_logprobs(dir / "lp.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].logprobs == recs[0].logprobs);
  CHECK(back[0].vocab_sigma == recs[0].vocab_sigma);
  CHECK_FALSE(back[1].has_vocab_stats());

  const std::vector<MembershipScore> scores = {loss_score(recs[0]), min_k_score(recs[0], 20)};
  save_scores(dir / "s.jsonl", scores);
  const auto sb = load_scores(dir / "s.jsonl");
  REQUIRE(sb.size() == 2);
  CHECK(sb[1].attack == Attack::min_k);
  CHECK(sb[1].value == scores[1].value);
  CHECK(sb[1].params["k_percent"] == 20.0);

  testing::write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"model_id\":\"m\",\"tokens\":[\"x\"]}\n");
  CHECK(testing::error_kind_of([&] { load_logprobs(dir / "bad.jsonl"); }) == ErrorKind::schema);
}

TEST_CASE("attack names") {
  for (Attack a : kAllAttacks) CHECK(parse_attack(attack_name(a)) == a);
  CHECK_FALSE(parse_attack("gradient").has_value());
}

TEST_CASE("stub language model is a normalized distribution with exact moments") {
  StubLanguageModel lm("target", 0.9);
  lm.train("the cat sat on the mat");
  lm.train("the dog sat on the log");
  lm.add_vocabulary("bird");
  lm.finalize();
  const std::vector<std::string> known = {"the", "cat", "sat", "on", "mat", "dog", "log", "bird"};
  CHECK(lm.vocabulary_size() == known.size() + 2);

  for (const std::string ctx : {"the", "sat", "bird"}) {
    std::vector<double> logs;
    for (const auto& w : known) logs.push_back(lm.score("x", ctx + " " + w).logprobs[1]);
    logs.push_back(lm.score("x", ctx + " never-seen-word").logprobs[1]);
    double total = 0.0, mean = 0.0, sq = 0.0;
    for (double l : logs) {
      total += std::exp(l);
      mean += l;
    }
    mean /= static_cast<double>(logs.size());
    for (double l : logs) sq += (l - mean) * (l - mean);
    const double sd = std::sqrt(sq / static_cast<double>(logs.size()));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    const auto at = lm.score("x", ctx + " cat");
    CHECK(at.vocab_mu[1] == doctest::Approx(mean).epsilon(1e-10));
    CHECK(at.vocab_sigma[1] == doctest::Approx(sd).epsilon(1e-8));
  }
}

TEST_CASE("stub target model favors its training texts") {
  StubLanguageModel target("target", 0.9), reference("reference", 0.0);
  const std::string seen = "alpha beta gamma delta epsilon zeta";
  const std::string unseen = "zeta alpha delta beta epsilon gamma";
  target.train(seen);
  reference.train(seen);
  reference.train(unseen);
  for (auto* lm : {&target, &reference}) {
    lm->add_vocabulary(unseen);
    lm->finalize();
  }
  CHECK(sequence_loss(target.score("s", seen)) < sequence_loss(target.score("u", unseen)));
  for (const auto& r : {target.score("s", seen), reference.score("u", unseen)}) CHECK(validate(r).empty());
  CHECK_THROWS(StubLanguageModel("bad", 1.0));
  StubLanguageModel raw("raw", 0.5);
  CHECK_THROWS(raw.score("x", "a"));
}
