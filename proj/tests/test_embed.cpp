#include <cmath>

#include "doctest.h"
#include "smia/embed.hpp"
#include "smia/error.hpp"
#include "support.hpp"

using namespace smia;
using namespace smia::embed;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

class ShortClient final : public EmbeddingClient {
 public:
  EmbeddingDescriptor descriptor() const override { return {"short", 8, true}; }
  std::vector<double> embed(std::string_view, std::string_view) override { return std::vector<double>(7, 0.1); }
};

}  // namespace

TEST_CASE("stub_embed is unit length and deterministic") {
  const auto a = stub_embed("the quick brown fox", 1024);
  CHECK(a.values.size() == 1024);
  CHECK(norm(a.values) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(stub_embed("the quick brown fox", 1024).values == a.values);
  CHECK(stub_embed("the quick brown dog", 1024).values != a.values);
  CHECK_THROWS(stub_embed("", 1024));
  CHECK_THROWS(stub_embed("   ", 1024));
}

TEST_CASE("stub_embed is a bag of words") {
  CHECK(stub_embed("fox the brown quick", 64).values == stub_embed("the quick brown fox", 64).values);
}

TEST_CASE("cosine") {
  const std::vector<double> v = {0.3, -1.2, 2.0};
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> e1 = {1, 0}, e2 = {0, 1}, d = {1, 1};
  CHECK(cosine(e1, e2) == 0.0);
  CHECK(std::abs(cosine(e1, d) - 0.70710678) <= 1e-8);
  CHECK(std::abs(cosine(e1, d) - 1.0 / std::sqrt(2.0)) <= 1e-15);

  const std::vector<double> a = {0.5, 2.0, -1.0}, b = {1.5, -0.25, 4.0};
  std::vector<double> scaled = a;
  for (auto& x : scaled) x *= 37.5;
  CHECK(std::abs(cosine(a, b) - cosine(b, a)) <= 1e-12);
  CHECK(std::abs(cosine(scaled, b) - cosine(a, b)) <= 1e-12);
  const std::vector<double> z = {0, 0, 0};
  CHECK_THROWS(cosine(z, a));
}

TEST_CASE("embed_texts preserves order and checks dimensions") {
  StubEmbedding client(32, 1);
  std::vector<std::pair<std::string, std::string>> items;
  for (int i = 0; i < 20; ++i) items.emplace_back("t" + std::to_string(i), "text number " + std::to_string(i));
  const auto serial = embed_texts(items, client, {1, 3});
  const auto parallel = embed_texts(items, client, {4, 3});
  REQUIRE(serial.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(serial[i].id == items[i].first);
    CHECK(serial[i].values.size() == 32);
    CHECK(serial[i].values == parallel[i].values);
  }
  const std::vector<std::pair<std::string, std::string>> one = {{"x", "hello"}};
  ShortClient bad;
  CHECK_THROWS(embed_texts(one, bad));
  CHECK_THROWS(embed_texts({}, client));
}

TEST_CASE("similarity histogram") {
  const std::vector<double> sims = {0.0, 0.005, 0.5, 0.999, 1.0, 1.2, -0.3};
  const auto h = similarity_histogram(sims);
  REQUIRE(h.size() == 100);
  CHECK(h[0] == 3);
  CHECK(h[50] == 1);
  CHECK(h[99] == 3);
}

TEST_CASE("embeddings file round trip and replay") {
  const auto dir = testing::scratch("embed");
  StubEmbedding client(16, 2);
  const std::vector<std::pair<std::string, std::string>> items = {{"a", "alpha beta"}, {"b", "gamma delta"}};
  const auto vecs = embed_texts(items, client);
  save_embeddings(dir / "e.jsonl", vecs);
  const auto back = load_embeddings(dir / "e.jsonl");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 16; ++i) CHECK(back[1].values[i] == doctest::Approx(vecs[1].values[i]).epsilon(1e-8));

  ReplayEmbedding replay(dir / "e.jsonl");
  CHECK(replay.descriptor().dimension == 16);
  CHECK(embed_texts(items, replay)[0].values == back[0].values);
  const std::vector<std::pair<std::string, std::string>> unknown = {{"zzz", "x"}};
  CHECK_THROWS(embed_texts(unknown, replay));
}
