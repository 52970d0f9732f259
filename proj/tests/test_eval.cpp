#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "smia/eval.hpp"

using namespace smia::eval;

namespace {

ScoredPopulation pop(std::vector<double> m, std::vector<double> n) { return {std::move(m), std::move(n), "x"}; }

double pairwise(const ScoredPopulation& p) {
  double w = 0.0;
  for (double a : p.member_scores)
    for (double b : p.nonmember_scores) w += a > b ? 1.0 : a == b ? 0.5 : 0.0;
  return w / static_cast<double>(p.member_scores.size() * p.nonmember_scores.size());
}

ScoredPopulation random_pop(std::mt19937_64& g, bool ties) {
  std::uniform_int_distribution<int> size(1, 60), coarse(0, 5);
  std::normal_distribution<double> x(0.0, 1.0);
  ScoredPopulation p;
  const int m = size(g), n = size(g);
  for (int i = 0; i < m; ++i) p.member_scores.push_back(ties && coarse(g) == 0 ? coarse(g) * 0.5 : x(g) + 0.5);
  for (int i = 0; i < n; ++i) p.nonmember_scores.push_back(ties && coarse(g) == 0 ? coarse(g) * 0.5 : x(g));
  return p;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc_roc(pop({0.9, 0.8}, {0.1, 0.2})) == 1.0);
  CHECK(auc_roc(pop({0.5}, {0.5})) == 0.5);
  CHECK(auc_roc(pop({0.3, 0.7}, {0.4, 0.2})) == 0.75);
  CHECK_THROWS(auc_roc(pop({}, {1.0})));
  CHECK_THROWS(auc_roc(pop({1.0}, {})));
}

TEST_CASE("roc curve examples") {
  const auto sep = roc_curve(pop({0.9, 0.8}, {0.1, 0.2}));
  CHECK(std::find(sep.begin(), sep.end(), RocPoint{0.0, 1.0}) != sep.end());
  const auto flat = roc_curve(pop({1, 1}, {1, 1, 1}));
  CHECK(flat == std::vector<RocPoint>{{0, 0}, {1, 1}});
  CHECK(auc_roc(pop({1, 1}, {1, 1, 1})) == 0.5);
  const auto p = pop({0.3, 0.7}, {0.4, 0.2});
  const auto c = roc_curve(p);
  CHECK(std::abs(trapezoid_area(c) - auc_roc(p)) <= 1e-12);
}

TEST_CASE("auc agrees with the pairwise definition and the curve area") {
  std::mt19937_64 g(1);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_pop(g, i % 2 == 0);
    CHECK(std::abs(auc_roc(p) - pairwise(p)) <= 1e-12);
    CHECK(std::abs(auc_roc(p) - trapezoid_area(roc_curve(p))) <= 1e-12);
  }
}

TEST_CASE("auc is a rank statistic") {
  std::mt19937_64 g(2);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_pop(g, false);
    auto ex = p, af = p, neg = p;
    for (auto* v : {&ex.member_scores, &ex.nonmember_scores})
      for (auto& x : *v) x = std::exp(x);
    for (auto* v : {&af.member_scores, &af.nonmember_scores})
      for (auto& x : *v) x = 3.0 * x + 7.0;
    for (auto* v : {&neg.member_scores, &neg.nonmember_scores})
      for (auto& x : *v) x = -x;
    CHECK(std::abs(auc_roc(ex) - auc_roc(p)) <= 1e-12);
    CHECK(std::abs(auc_roc(af) - auc_roc(p)) <= 1e-12);
    CHECK(std::abs(auc_roc(neg) - (1.0 - auc_roc(p))) <= 1e-12);
  }
}

TEST_CASE("tpr at fixed fpr") {
  ScoredPopulation p;
  for (int i = 1; i <= 100; ++i) p.nonmember_scores.push_back(i);
  p.member_scores = {95, 96, 97, 50};
  CHECK(tpr_at_fpr(p, 0.05) == 0.5);
  CHECK(realized_fpr(p, 0.05) == 0.05);
  CHECK(tpr_at_fpr(pop({5, 6}, {1, 2, 3}), 0.0) == 1.0);
  CHECK(tpr_at_fpr(pop({1, 2, 3}, {1, 2, 3}), 0.0) == 0.0);
  CHECK_THROWS(tpr_at_fpr(p, 1.0));
  CHECK_THROWS(tpr_at_fpr(p, -0.1));
}

TEST_CASE("tpr is monotone in the budget and never overspends it") {
  std::mt19937_64 g(3);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_pop(g, true);
    double prev = 0.0;
    for (int b = 0; b < 100; ++b) {
      const double f = b / 100.0;
      const double t = tpr_at_fpr(p, f);
      CHECK(t >= prev);
      CHECK(realized_fpr(p, f) <= f);
      prev = t;
    }
    const auto c = roc_curve(p);
    CHECK(c.front() == RocPoint{0, 0});
    CHECK(c.back() == RocPoint{1, 1});
  }
}

TEST_CASE("report rendering") {
  const auto r = evaluate(pop({0.3, 0.7}, {0.4, 0.2}));
  CHECK(r.auc == 0.75);
  CHECK(r.tpr_at.size() == 3);
  const auto json = nlohmann::json::parse(render_report_json({{"loss", r}}));
  CHECK(json["loss"]["auc"] == 0.75);
  CHECK(json["loss"]["tpr_at"].contains("0.02"));
  CHECK(json["loss"]["tpr_at"].contains("0.05"));
  CHECK(json["loss"]["tpr_at"].contains("0.10"));
  const auto csv = render_roc_csv({{"loss", r}});
  CHECK(csv.rfind("attack,fpr,tpr\n", 0) == 0);
  CHECK(csv.find("loss,0,0\n") != std::string::npos);
  CHECK(csv.find("loss,1,1\n") != std::string::npos);
}
