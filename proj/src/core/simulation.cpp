#include "agepost/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace agepost {

SimulatedAnnotator::SimulatedAnnotator(double beta_true, std::uint64_t seed, AnnotatorMode mode)
    : beta_true_(beta_true), mode_(mode), rng_(seed) {
  require(std::isfinite(beta_true) && beta_true > 0.0, "annotator beta must be positive");
}

ComparisonEvent SimulatedAnnotator::simulate_comparison(int true_age, int ref_age) {
  bool older;
  if (mode_ == AnnotatorMode::Truthful) {
    older = true_age == ref_age ? rng_.bernoulli(0.5) : true_age > ref_age;
  } else {
    older = rng_.bernoulli(sigmoid(beta_true_ * static_cast<double>(true_age - ref_age)));
  }
  ComparisonEvent e;
  e.ref_age = ref_age;
  e.outcome = older ? Outcome::Older : Outcome::Younger;
  e.annotator_id = "sim";
  return e;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<NarrowingRow> ci_narrowing_experiment(const NarrowingConfig& config) {
  require(config.trials >= 100, "narrowing experiment needs at least 100 trials");
  require(config.max_age_gap >= 1, "bracketing window must be >= 1 year");
  for (int m : config.comparison_counts) require(m >= 0, "comparison counts must be >= 0");

  const AgeGrid& grid = config.grid;
  const LogisticModel model(config.model_beta);
  const auto prior = AgeDistribution::uniform(grid);

  // One reference per grid age; bracketing picks among them.
  std::vector<ReferenceItem> pool;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int age = grid.age_at(i);
    pool.push_back({"ref-" + std::to_string(age), "", age, Gender::Unknown});
  }

  const std::size_t rows = config.comparison_counts.size();
  std::vector<std::vector<double>> widths(rows);
  for (auto& w : widths) w.reserve(static_cast<std::size_t>(config.trials));

  for (int trial = 0; trial < config.trials; ++trial) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(trial)));
    SimulatedAnnotator annotator(config.annotator_beta, rng.next_u64(), config.annotator_mode);
    const int truth = rng.uniform_int(grid.min_age(), grid.max_age());
    const int room_below = std::min(config.max_age_gap, truth - grid.min_age());
    const int room_above = std::min(config.max_age_gap, grid.max_age() - truth);

    for (std::size_t r = 0; r < rows; ++r) {
      const int m = config.comparison_counts[r];
      std::vector<ComparisonEvent> events;
      if (m > 0) {
        SelectionPolicy policy;
        policy.gender_match_required = false;
        policy.max_age_gap = config.max_age_gap;
        policy.num_below = std::min(m / 2, room_below);
        policy.num_above = std::min(m - policy.num_below, room_above);
        policy.num_below = std::min(m - policy.num_above, room_below);
        QueryItem query{"trial", "", Gender::Unknown, truth, truth};
        for (const auto& ref : select_references(query, pool, policy, truth, rng)) {
          events.push_back(annotator.simulate_comparison(truth, ref.age));
        }
      }
      const auto post = posterior_from_events(model, prior, events);
      widths[r].push_back(confidence_interval(post, kOutlierLevel).width());
    }
  }

  std::vector<NarrowingRow> out;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& w = widths[r];
    const double n = static_cast<double>(w.size());
    NarrowingRow row;
    row.comparisons = config.comparison_counts[r];
    row.median_width = quantile(w, 0.5);
    row.p10_width = quantile(w, 0.1);
    row.p90_width = quantile(w, 0.9);
    row.frac_lt8 = static_cast<double>(std::count_if(w.begin(), w.end(), [](double v) { return v < 8; })) / n;
    row.frac_gt15 =
        static_cast<double>(std::count_if(w.begin(), w.end(), [](double v) { return v > kOutlierMaxWidth; })) / n;
    row.discard_rate = row.frac_gt15;
    out.push_back(row);
  }
  return out;
}

}  // namespace agepost
