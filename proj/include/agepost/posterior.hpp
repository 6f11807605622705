#pragma once

// Discrete-grid Bayesian machinery for pairwise age comparisons.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agepost/error.hpp"

namespace agepost {

// Integer-year bins covering [min_age, max_age].
class AgeGrid {
 public:
  AgeGrid() = default;
  AgeGrid(int min_age, int max_age);

  int min_age() const noexcept { return min_age_; }
  int max_age() const noexcept { return max_age_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(max_age_ - min_age_ + 1);
  }
  bool contains(int age) const noexcept { return age >= min_age_ && age <= max_age_; }
  std::size_t index_of(int age) const;
  int age_at(std::size_t index) const noexcept {
    return min_age_ + static_cast<int>(index);
  }
  int midpoint() const noexcept { return (min_age_ + max_age_) / 2; }

  friend bool operator==(const AgeGrid&, const AgeGrid&) = default;

 private:
  int min_age_ = 0;
  int max_age_ = 70;
};

inline constexpr double kNormalizationTolerance = 1e-9;

// Normalized probability mass over an AgeGrid.
class AgeDistribution {
 public:
  // Validates non-negativity, length and unit sum (within 1e-9).
  AgeDistribution(AgeGrid grid, std::vector<double> mass);

  // Scales non-negative weights to unit sum. Throws EmptySupport on zero total.
  static AgeDistribution from_weights(AgeGrid grid, std::vector<double> weights);
  static AgeDistribution uniform(AgeGrid grid);
  static AgeDistribution point_mass(AgeGrid grid, int age);

  const AgeGrid& grid() const noexcept { return grid_; }
  std::span<const double> mass() const noexcept { return mass_; }
  double at(int age) const { return mass_[grid_.index_of(age)]; }

  friend bool operator==(const AgeDistribution&, const AgeDistribution&) = default;

 private:
  AgeGrid grid_;
  std::vector<double> mass_;
};

enum class Outcome { Older, Younger };

// One judgment of the query against a reference of known age.
struct ComparisonEvent {
  int ref_age = 0;
  Outcome outcome = Outcome::Older;
  std::string ref_id;
  std::string annotator_id;
  std::string timestamp;

  friend bool operator==(const ComparisonEvent&, const ComparisonEvent&) = default;
};

inline constexpr double kDefaultBeta = 0.36;

// Logistic annotator response: P(older | age difference d) = sigmoid(beta * d).
class LogisticModel {
 public:
  LogisticModel() = default;
  explicit LogisticModel(double beta);

  double beta() const noexcept { return beta_; }

 private:
  double beta_ = kDefaultBeta;
};

double sigmoid(double x) noexcept;
// log(sigmoid(x)) without overflow or cancellation at large |x|.
double log_sigmoid(double x) noexcept;

// P(event | true age). The partition term sigmoid(x) + sigmoid(-x) is
// evaluated and divided out even though it is 1 analytically.
double comparison_likelihood(const LogisticModel& model, const ComparisonEvent& event,
                             int age);

// Per-bin floor for the accumulated log mass; bins below it carry no mass.
inline constexpr double kLogMassFloor = -690.7755278982137;  // log(1e-300)

// prior(a) * prod_m P(C_m | a), normalized. Accumulates in the log domain.
// Throws DegenerateEvidence when every bin falls below the floor.
AgeDistribution posterior_from_events(const LogisticModel& model,
                                      const AgeDistribution& prior,
                                      std::span<const ComparisonEvent> events);

// Most probable age; ties resolve to the youngest.
int mode(const AgeDistribution& dist);

struct ConfidenceInterval {
  int lo = 0;
  int hi = 0;
  double mass = 0.0;

  int width() const noexcept { return hi - lo; }
};

// Shortest contiguous window holding at least `level` of the mass. Equal
// widths prefer the heavier window, then the younger one.
ConfidenceInterval confidence_interval(const AgeDistribution& dist, double level);

inline constexpr double kOutlierLevel = 0.90;
inline constexpr int kOutlierMaxWidth = 15;

bool is_outlier(const AgeDistribution& dist);

struct BetaSample {
  int age_diff = 0;
  double frac_older = 0.0;
};

struct BetaFitOptions {
  double lower = 1e-3;
  double upper = 10.0;
  double tolerance = 1e-6;
};

// Least-squares fit of sigmoid(beta * age_diff) to observed older-fractions by
// golden-section search. Throws FitDiverged on a flat objective.
LogisticModel fit_beta(std::span<const BetaSample> samples, const BetaFitOptions& options = {});

// Minimizes a unimodal function on [lo, hi]; returns the final bracket midpoint.
template <typename F>
double golden_section_minimize(F&& f, double lo, double hi, double tolerance) {
  constexpr double inv_phi = 0.6180339887498949;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > tolerance) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace agepost
