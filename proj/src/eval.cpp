#include "smia/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "smia/error.hpp"
#include "smia/jsonl.hpp"

namespace smia::eval {
namespace {

void require_nonempty(const ScoredPopulation& pop) {
  if (pop.member_scores.empty() || pop.nonmember_scores.empty()) {
    fail(ErrorKind::invalid_input, "attack " + pop.attack + ": member and nonmember populations must be non-empty");
  }
  for (const auto* v : {&pop.member_scores, &pop.nonmember_scores})
    for (double x : *v)
      if (!std::isfinite(x)) fail(ErrorKind::invalid_input, "attack " + pop.attack + ": non-finite score");
}

std::size_t fp_budget(double f, std::size_t n) {
  // Guards against 0.29 * 100 = 28.999999999999996.
  return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
}

double threshold_for(const ScoredPopulation& pop, double f) {
  if (!(f >= 0.0 && f < 1.0)) fail(ErrorKind::invalid_input, "FPR budget must be in [0, 1)");
  require_nonempty(pop);
  std::vector<double> neg = pop.nonmember_scores;
  std::sort(neg.begin(), neg.end(), std::greater<>());
  const std::size_t k = std::min(fp_budget(f, neg.size()), neg.size() - 1);
  return neg[k];
}

double fraction_above(const std::vector<double>& v, double t) {
  const auto n = std::count_if(v.begin(), v.end(), [t](double x) { return x > t; });
  return static_cast<double>(n) / static_cast<double>(v.size());
}

}  // namespace

double auc_roc(const ScoredPopulation& pop) {
  require_nonempty(pop);
  const std::size_t m = pop.member_scores.size();
  const std::size_t n = pop.nonmember_scores.size();
  std::vector<std::pair<double, bool>> all;
  all.reserve(m + n);
  for (double x : pop.member_scores) all.emplace_back(x, true);
  for (double x : pop.nonmember_scores) all.emplace_back(x, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Twice the member rank sum, so mid-ranks stay integral.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t members = 0;
    while (j < all.size() && all[j].first == all[i].first) members += all[j++].second ? 1 : 0;
    // ranks i+1 .. j, mean (i + 1 + j) / 2
    twice_rank_sum += static_cast<double>(members) * static_cast<double>(i + 1 + j);
    i = j;
  }
  const double md = static_cast<double>(m);
  const double u = (twice_rank_sum - md * (md + 1.0)) / 2.0;
  return u / (md * static_cast<double>(n));
}

std::vector<RocPoint> roc_curve(const ScoredPopulation& pop) {
  require_nonempty(pop);
  std::vector<std::pair<double, bool>> all;
  for (double x : pop.member_scores) all.emplace_back(x, true);
  for (double x : pop.nonmember_scores) all.emplace_back(x, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double m = static_cast<double>(pop.member_scores.size());
  const double n = static_cast<double>(pop.nonmember_scores.size());
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double t = all[i].first;
    while (i < all.size() && all[i].first == t) (all[i++].second ? tp : fp)++;
    curve.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / m});
  }
  if (!(curve.back() == RocPoint{1.0, 1.0})) curve.push_back({1.0, 1.0});
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

double tpr_at_fpr(const ScoredPopulation& pop, double f) {
  return fraction_above(pop.member_scores, threshold_for(pop, f));
}

double realized_fpr(const ScoredPopulation& pop, double f) {
  return fraction_above(pop.nonmember_scores, threshold_for(pop, f));
}

RocReport evaluate(const ScoredPopulation& pop) {
  RocReport r;
  r.auc = auc_roc(pop);
  r.curve = roc_curve(pop);
  for (double f : kReportedFprs) r.tpr_at[f] = tpr_at_fpr(pop, f);
  return r;
}

namespace {

std::string fpr_key(double f) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", f);
  return buf;
}

}  // namespace

std::string render_report_json(const std::vector<std::pair<std::string, RocReport>>& reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [attack, r] : reports) {
    nlohmann::ordered_json tpr = nlohmann::ordered_json::object();
    for (const auto& [f, v] : r.tpr_at) tpr[fpr_key(f)] = v;
    j[attack] = {{"auc", r.auc}, {"tpr_at", tpr}};
  }
  return j.dump(2) + "\n";
}

std::string render_roc_csv(const std::vector<std::pair<std::string, RocReport>>& reports) {
  std::string out = "attack,fpr,tpr\n";
  for (const auto& [attack, r] : reports) {
    for (const auto& p : r.curve) {
      out += attack + "," + jsonl::format_number(p.fpr) + "," + jsonl::format_number(p.tpr) + "\n";
    }
  }
  return out;
}

}  // namespace smia::eval
