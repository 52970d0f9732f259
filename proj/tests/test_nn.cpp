#include <cmath>
#include <random>

#include "doctest.h"
#include "smia/error.hpp"
#include "smia/model_io.hpp"
#include "smia/nn.hpp"
#include "smia/simd/kernels.hpp"
#include "support.hpp"

using namespace smia;
using namespace smia::nn;

namespace {

std::vector<FeatureRow> random_rows(std::mt19937_64& g, std::size_t count, std::size_t d) {
  std::normal_distribution<double> x(0.0, 0.5);
  std::vector<FeatureRow> rows(count);
  for (std::size_t i = 0; i < count; ++i) {
    rows[i].emb_delta.resize(d);
    for (auto& v : rows[i].emb_delta) v = x(g);
    rows[i].loss_delta = x(g);
    rows[i].label = static_cast<int>(i % 2);
    rows[i].orig_id = "o" + std::to_string(i / 3);
    rows[i].neighbor_index = i % 3;
  }
  return rows;
}

std::vector<const FeatureRow*> pointers(const std::vector<FeatureRow>& rows) {
  std::vector<const FeatureRow*> p;
  for (const auto& r : rows) p.push_back(&r);
  return p;
}

}  // namespace

TEST_CASE("build_feature_rows") {
  const embed::EmbeddingVector o{"o", {1.0, 2.0}};
  const std::vector<embed::EmbeddingVector> same = {o, o};
  const std::vector<double> same_loss = {3.0, 3.0};
  for (const auto& r : build_feature_rows(o, same, 3.0, same_loss, 1)) {
    CHECK(r.loss_delta == 0.0);
    CHECK(r.emb_delta == std::vector<double>{0.0, 0.0});
  }
  const std::vector<embed::EmbeddingVector> nb = {{"o#0", {0.5, 2.5}}, {"o#1", {1.0, 1.0}}};
  const std::vector<double> nl = {2.0, 4.5};
  const auto rows = build_feature_rows(o, nb, 3.0, nl, 0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].emb_delta == std::vector<double>{0.5, -0.5});
  CHECK(rows[1].loss_delta == -1.5);
  CHECK(rows[1].neighbor_index == 1);
  CHECK(rows[1].orig_id == "o");
  CHECK(rows[1].label == 0);

  std::vector<embed::EmbeddingVector> many(25, o);
  std::vector<double> ml(25, 1.0);
  CHECK(build_feature_rows(o, many, 1.0, ml, 1).size() == 25);
  const std::vector<embed::EmbeddingVector> bad = {{"o#0", {1.0}}};
  const std::vector<double> one = {1.0};
  CHECK_THROWS(build_feature_rows(o, bad, 1.0, one, 1));
}

TEST_CASE("model shape") {
  const auto m = SmiaModel::initialize(1024, 1);
  const auto& L = m.layers();
  REQUIRE(L.size() == 8);
  CHECK((L[0].in == 1 && L[0].out == 512));
  CHECK((L[1].in == 1024 && L[1].out == 512));
  const std::size_t trunk[][2] = {{1024, 512}, {512, 256}, {256, 128}, {128, 64}, {64, 32}, {32, 1}};
  for (std::size_t i = 0; i < 6; ++i) CHECK((L[i + 2].in == trunk[i][0] && L[i + 2].out == trunk[i][1]));
  CHECK_FALSE(m.deviates_from_reference_shape());
  CHECK(SmiaModel::initialize(16, 1).deviates_from_reference_shape());
  for (const auto& l : L) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (double w : l.weight) REQUIRE(std::abs(w) <= bound);
    for (double b : l.bias) REQUIRE(std::abs(b) <= bound);
  }
}

TEST_CASE("forward pass") {
  std::mt19937_64 g(1);
  const auto rows = random_rows(g, 4, 32);
  const SmiaModel zero(32);
  CHECK(mlp_forward(zero, rows[0], Mode::eval) == 0.5);

  const auto m = SmiaModel::initialize(32, 3);
  const double a = mlp_forward(m, rows[1], Mode::eval);
  CHECK(a == mlp_forward(m, rows[1], Mode::eval));
  CHECK(a > 0.0);
  CHECK(a < 1.0);
  SplitMix64 r1(8), r2(8);
  CHECK(mlp_forward(m, rows[1], Mode::train, &r1) == mlp_forward(m, rows[1], Mode::train, &r2));

  FeatureRow extreme = rows[0];
  extreme.loss_delta = 1e6;
  for (auto& v : extreme.emb_delta) v = -1e6;
  const double e = mlp_forward(m, extreme, Mode::eval);
  CHECK(e > 0.0);
  CHECK(e < 1.0);

  FeatureRow wrong = rows[0];
  wrong.emb_delta.pop_back();
  CHECK_THROWS(mlp_forward(m, wrong, Mode::eval));
}

TEST_CASE("batched outputs match one-row forwards on both kernel sets") {
  std::mt19937_64 g(2);
  const auto rows = random_rows(g, 300, 48);
  const auto m = SmiaModel::initialize(48, 4);
  const simd::Isa before = simd::active_isa();
  std::vector<std::vector<double>> per_isa;
  for (auto isa : {simd::Isa::scalar, simd::Isa::avx2}) {
    if (!simd::isa_supported(isa)) continue;
    simd::set_isa(isa);
    const auto batch = predict(m, rows);
    for (std::size_t i = 0; i < rows.size(); i += 37) CHECK(batch[i] == doctest::Approx(mlp_forward(m, rows[i], Mode::eval)).epsilon(1e-12));
    per_isa.push_back(batch);
  }
  simd::set_isa(before);
  for (std::size_t k = 1; k < per_isa.size(); ++k)
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(per_isa[k][i] == doctest::Approx(per_isa[0][i]).epsilon(1e-10));
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 g(3);
  auto model = SmiaModel::initialize(24, 5, 0.0);
  const auto rows = random_rows(g, 5, 24);
  const auto ptrs = pointers(rows);
  auto grads = ParameterSet::zeros_like(model);
  BatchEngine(model).run(ptrs, Mode::eval, nullptr, &grads);
  auto loss = [&] { return BatchEngine(model).run(ptrs, Mode::eval, nullptr, nullptr); };
  const double h = 1e-5;
  int checked = 0;
  for (std::size_t li = 0; li < model.layers().size(); ++li) {
    auto& w = model.layers()[li].weight;
    std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
    for (int s = 0; s < 15; ++s) {
      const std::size_t i = pick(g);
      const double keep = w[i];
      w[i] = keep + h;
      const double up = loss();
      w[i] = keep - h;
      const double down = loss();
      w[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads.layers[li].weight[i];
      CHECK(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7}) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("dropout is inverted and seeded") {
  std::mt19937_64 g(4);
  const auto rows = random_rows(g, 64, 16);
  const auto ptrs = pointers(rows);
  auto m = SmiaModel::initialize(16, 6, 0.5);
  BatchEngine engine(m);
  SplitMix64 a(1), b(1), c(2);
  std::vector<double> pa, pb, pc, pe;
  engine.run(ptrs, Mode::train, &a, nullptr, &pa);
  engine.run(ptrs, Mode::train, &b, nullptr, &pb);
  engine.run(ptrs, Mode::train, &c, nullptr, &pc);
  engine.run(ptrs, Mode::eval, nullptr, nullptr, &pe);
  CHECK(pa == pb);
  CHECK(pa != pc);
  CHECK(pa != pe);
}

TEST_CASE("smia score and classification") {
  std::mt19937_64 g(5);
  const auto rows = random_rows(g, 10, 8);
  const auto m = SmiaModel::initialize(8, 7);
  const auto outs = predict(m, rows);
  CHECK(smia_score(m, std::span<const FeatureRow>(rows.data(), 1)) == outs[0]);
  std::vector<FeatureRow> same(6, rows[2]);
  CHECK(smia_score(m, same) == doctest::Approx(outs[2]).epsilon(1e-15));
  auto reversed = rows;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(smia_score(m, rows) == smia_score(m, reversed));
  CHECK_THROWS(smia_score(m, {}));

  CHECK(classify(0.7, 0.5));
  CHECK_FALSE(classify(0.5, 0.5));
  CHECK_FALSE(classify(0.3, 0.5));
}

TEST_CASE("mean of outputs 0.2 and 0.8 is 0.5") {
  // Single-input model whose output is sigmoid(loss_delta).
  SmiaModel m(1, 0.0);
  auto& L = m.layers();
  L[0].weight[0] = 1.0;                 // loss branch unit 0 = relu(x)
  L[2].weight[0] = 1.0;                 // trunk unit 0 = relu(unit 0)
  for (std::size_t l = 3; l < L.size(); ++l) L[l].weight[0] = 1.0;
  // relu cuts negatives, so use positive logits for both rows.
  FeatureRow lo, hi;
  lo.emb_delta = hi.emb_delta = {0.0};
  const double z1 = std::log(0.2 / 0.8) + 2.0, z2 = std::log(0.8 / 0.2) + 2.0;
  L.back().bias[0] = -2.0;
  lo.loss_delta = z1;
  hi.loss_delta = z2;
  CHECK(mlp_forward(m, lo, Mode::eval) == doctest::Approx(0.2).epsilon(1e-12));
  const std::vector<FeatureRow> both = {lo, hi};
  CHECK(smia_score(m, both) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("features file and model file round trip") {
  const auto dir = testing::scratch("nn");
  std::mt19937_64 g(6);
  const auto rows = random_rows(g, 7, 12);
  save_features(dir / "f.jsonl", rows);
  const auto back = load_features(dir / "f.jsonl");
  REQUIRE(back.size() == 7);
  CHECK(back[3].emb_delta == rows[3].emb_delta);
  CHECK(back[3].loss_delta == rows[3].loss_delta);
  CHECK(back[3].orig_id == rows[3].orig_id);

  auto m = SmiaModel::initialize(12, 9);
  m.epoch_of_best_validation = 3;
  m.history = {{1, 0.7, 0.69}, {2, 0.6, 0.65}, {3, 0.5, 0.6}};
  save_model(dir / "m.bin", m);
  const auto mb = load_model(dir / "m.bin");
  CHECK(mb.embedding_dim() == 12);
  CHECK(mb.epoch_of_best_validation == 3);
  REQUIRE(mb.history.size() == 3);
  CHECK(mb.history[2].validation_loss == 0.6);
  for (std::size_t l = 0; l < m.layers().size(); ++l) CHECK(mb.layers()[l].weight == m.layers()[l].weight);
  CHECK(predict(mb, rows) == predict(m, rows));

  testing::write_file(dir / "junk.bin", "not a model");
  CHECK_THROWS(load_model(dir / "junk.bin"));
}
