#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace smia::eval {

// Scores oriented "higher => member".
struct ScoredPopulation {
  std::vector<double> member_scores;
  std::vector<double> nonmember_scores;
  std::string attack;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

inline constexpr double kReportedFprs[] = {0.02, 0.05, 0.10};

struct RocReport {
  double auc = 0.5;
  std::vector<RocPoint> curve;
  std::map<double, double> tpr_at;  // keyed by FPR budget
};

// Mann-Whitney AUC from mid-ranks; equals the pairwise definition with half
// credit for ties.
double auc_roc(const ScoredPopulation& pop);

// Thresholds at each distinct score, descending, predicate score >= t; starts at
// (0,0) and ends at (1,1).
std::vector<RocPoint> roc_curve(const ScoredPopulation& pop);

// Trapezoidal area under a curve.
double trapezoid_area(std::span<const RocPoint> curve);

// k = floor(f * N); the threshold is the (k+1)-th largest nonmember score and a
// text counts as a member only when strictly above it. Returns the member
// fraction strictly above the threshold.
double tpr_at_fpr(const ScoredPopulation& pop, double f);

// Fraction of nonmembers the tpr_at_fpr threshold flags, for budget checks.
double realized_fpr(const ScoredPopulation& pop, double f);

RocReport evaluate(const ScoredPopulation& pop);

// report.json: {attack: {"auc": x, "tpr_at": {"0.02": ..., "0.05": ..., "0.10": ...}}}
std::string render_report_json(const std::vector<std::pair<std::string, RocReport>>& reports);
// roc.csv: "attack,fpr,tpr"
std::string render_roc_csv(const std::vector<std::pair<std::string, RocReport>>& reports);

}  // namespace smia::eval
