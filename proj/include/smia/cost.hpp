#pragma once

namespace smia {

struct CostModel {
  double beta = 0.0;  // originals per class
  double n = 0.0;     // neighbors per original
  double cost_neighbor = 0.0;
  double cost_embedding = 0.0;
  double cost_target = 0.0;
  double avg_chars = 0.0;
  double price_per_char = 0.0;
};

// Item count used for the totals. `worked_example` counts originals plus
// neighbors for both classes, 2*beta*(n+1) (6,000 + 6,000 + 150,000 + 150,000
// for beta = 6000, n = 25). `closed_form` is the alternative 2*(n*beta + 1).
enum class ItemCountRule { worked_example, closed_form };

struct CostEstimate {
  double item_count = 0.0;
  double total_cost = 0.0;           // item_count * (c_N + c_E + c_T)
  double embedding_char_cost = 0.0;  // item_count * avg_chars * price_per_char
};

CostEstimate cost_estimate(const CostModel& cm, ItemCountRule rule = ItemCountRule::worked_example);

}  // namespace smia
