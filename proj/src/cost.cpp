#include "smia/cost.hpp"

#include <string>
#include <utility>

#include "smia/error.hpp"

namespace smia {

CostEstimate cost_estimate(const CostModel& cm, ItemCountRule rule) {
  const std::pair<const char*, double> fields[] = {
      {"beta", cm.beta},           {"n", cm.n},                   {"c_N", cm.cost_neighbor},
      {"c_E", cm.cost_embedding},  {"c_T", cm.cost_target},       {"avg_chars", cm.avg_chars},
      {"price_per_char", cm.price_per_char}};
  for (const auto& [name, v] : fields) {
    if (!(v >= 0.0)) fail(ErrorKind::config, std::string("cost model field ") + name + " must be non-negative");
  }
  CostEstimate e;
  e.item_count = rule == ItemCountRule::worked_example ? 2.0 * cm.beta * (cm.n + 1.0) : 2.0 * (cm.n * cm.beta + 1.0);
  e.total_cost = e.item_count * (cm.cost_neighbor + cm.cost_embedding + cm.cost_target);
  e.embedding_char_cost = e.item_count * cm.avg_chars * cm.price_per_char;
  return e;
}

}  // namespace smia
