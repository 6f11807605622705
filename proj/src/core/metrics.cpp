#include "agepost/metrics.hpp"

#include <cstdlib>
#include <string>

#include "agepost/error.hpp"

namespace agepost {

int age_to_group(int age) {
  int best = 0;
  int best_gap = -1;
  for (int g = 0; g < static_cast<int>(kAdienceGroups.size()); ++g) {
    const auto& band = kAdienceGroups[static_cast<std::size_t>(g)];
    int gap = 0;
    if (age < band.lo) gap = band.lo - age;
    else if (age > band.hi) gap = age - band.hi;
    if (best_gap < 0 || gap < best_gap) {
      best = g;
      best_gap = gap;
    }
  }
  return best;
}

MetricReport evaluate(std::span<const int> predicted, std::span<const int> truth,
                      std::span<const int> ca_levels) {
  if (predicted.size() != truth.size()) {
    fail(ErrorCode::LengthMismatch, "got " + std::to_string(predicted.size()) +
                                        " predictions for " + std::to_string(truth.size()) +
                                        " ground-truth ages");
  }
  require(!predicted.empty(), "cannot evaluate an empty prediction set");

  MetricReport report;
  report.count = predicted.size();
  const double n = static_cast<double>(predicted.size());
  std::vector<int> pred_groups;
  std::vector<int> truth_groups;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    abs_sum += std::abs(predicted[i] - truth[i]);
    pred_groups.push_back(age_to_group(predicted[i]));
    truth_groups.push_back(age_to_group(truth[i]));
  }
  report.mae = abs_sum / n;

  auto cumulative = [&](int level) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      if (std::abs(predicted[i] - truth[i]) <= level) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / n;
  };
  for (int level : ca_levels) report.ca[level] = cumulative(level);
  report.recall_pm3 = cumulative(3);

  const auto groups = evaluate_groups(pred_groups, truth_groups);
  report.exact_group_acc = groups.exact;
  report.one_off_acc = groups.one_off;
  return report;
}

GroupAccuracy evaluate_groups(std::span<const int> predicted_group, std::span<const int> truth_group) {
  if (predicted_group.size() != truth_group.size()) {
    fail(ErrorCode::LengthMismatch, "group prediction and truth lengths differ");
  }
  require(!predicted_group.empty(), "cannot evaluate an empty prediction set");
  std::size_t exact = 0;
  std::size_t one_off = 0;
  for (std::size_t i = 0; i < predicted_group.size(); ++i) {
    const int gap = std::abs(predicted_group[i] - truth_group[i]);
    if (gap == 0) ++exact;
    if (gap <= 1) ++one_off;
  }
  const double n = static_cast<double>(predicted_group.size());
  return {100.0 * static_cast<double>(exact) / n, 100.0 * static_cast<double>(one_off) / n};
}

}  // namespace agepost
