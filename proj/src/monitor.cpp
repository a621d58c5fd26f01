#include "pet/monitor.hpp"

#include <algorithm>
#include <map>

namespace pet {

bool check_underfit(double train_accuracy) { return train_accuracy < 0.5; }

bool check_constant(const std::vector<int>& predictions) {
  if (predictions.empty()) return false;
  return std::all_of(predictions.begin(), predictions.end(),
                     [&](int p) { return p == predictions.front(); });
}

double dominant_label_fraction(const std::vector<int>& gold) {
  if (gold.empty()) throw Error("dominant_label_fraction: empty dataset");
  std::map<int, std::size_t> counts;
  for (int g : gold) ++counts[g];
  std::size_t max_count = 0;
  for (const auto& [label, count] : counts) {
    (void)label;
    max_count = std::max(max_count, count);
  }
  return static_cast<double>(max_count) / static_cast<double>(gold.size());
}

}  // namespace pet
