#pragma once

#include <cstdint>
#include <vector>

#include "agepost/pipeline.hpp"
#include "agepost/posterior.hpp"
#include "agepost/random.hpp"

namespace agepost {

enum class AnnotatorMode { Stochastic, Truthful };

// Synthetic rater answering "older" with probability sigmoid(beta_true * (true - ref)),
// or deterministically in Truthful mode.
class SimulatedAnnotator {
 public:
  SimulatedAnnotator(double beta_true, std::uint64_t seed, AnnotatorMode mode);

  double beta_true() const noexcept { return beta_true_; }
  AnnotatorMode mode() const noexcept { return mode_; }

  ComparisonEvent simulate_comparison(int true_age, int ref_age);

 private:
  double beta_true_;
  AnnotatorMode mode_;
  Rng rng_;
};

struct NarrowingConfig {
  AgeGrid grid;
  double model_beta = kDefaultBeta;
  double annotator_beta = kDefaultBeta;
  AnnotatorMode annotator_mode = AnnotatorMode::Truthful;
  // Bracketing window around the true age; M comparisons split floor(M/2)
  // below and the rest above, shifted across when a side runs out of grid.
  int max_age_gap = 10;
  int trials = 10000;
  std::uint64_t seed = 0;
  std::vector<int> comparison_counts{0, 1, 2, 4, 6, 8};
};

struct NarrowingRow {
  int comparisons = 0;
  double median_width = 0.0;
  double p10_width = 0.0;
  double p90_width = 0.0;
  double frac_lt8 = 0.0;
  double frac_gt15 = 0.0;
  double discard_rate = 0.0;
};

// Posterior CI(0.90) width distribution versus number of comparisons. Each
// trial draws from its own stream derived from the master seed.
std::vector<NarrowingRow> ci_narrowing_experiment(const NarrowingConfig& config);

// Linear-interpolated quantile of a sample (q in [0, 1]).
double quantile(std::vector<double> values, double q);

}  // namespace agepost
