#include "agepost/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace agepost {

AgeGrid::AgeGrid(int min_age, int max_age) : min_age_(min_age), max_age_(max_age) {
  require(min_age >= 0, "age grid minimum must be >= 0");
  require(max_age > min_age, "age grid maximum must exceed its minimum");
}

std::size_t AgeGrid::index_of(int age) const {
  require(contains(age), "age " + std::to_string(age) + " outside grid [" +
                             std::to_string(min_age_) + ", " + std::to_string(max_age_) + "]");
  return static_cast<std::size_t>(age - min_age_);
}

AgeDistribution::AgeDistribution(AgeGrid grid, std::vector<double> mass)
    : grid_(grid), mass_(std::move(mass)) {
  require(mass_.size() == grid_.size(), "distribution length does not match grid");
  double total = 0.0;
  for (double m : mass_) {
    require(std::isfinite(m) && m >= 0.0, "distribution mass must be finite and non-negative");
    total += m;
  }
  require(std::abs(total - 1.0) <= kNormalizationTolerance, "distribution mass must sum to 1");
}

AgeDistribution AgeDistribution::from_weights(AgeGrid grid, std::vector<double> weights) {
  require(weights.size() == grid.size(), "weight vector length does not match grid");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorCode::EmptySupport, "distribution has no support on the grid");
  for (double& w : weights) w /= total;
  return AgeDistribution(grid, std::move(weights));
}

AgeDistribution AgeDistribution::uniform(AgeGrid grid) {
  return from_weights(grid, std::vector<double>(grid.size(), 1.0));
}

AgeDistribution AgeDistribution::point_mass(AgeGrid grid, int age) {
  std::vector<double> mass(grid.size(), 0.0);
  mass[grid.index_of(age)] = 1.0;
  return AgeDistribution(grid, std::move(mass));
}

LogisticModel::LogisticModel(double beta) : beta_(beta) {
  require(std::isfinite(beta) && beta > 0.0, "logistic beta must be positive");
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) noexcept {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

namespace {

double signed_gap(const LogisticModel& model, const ComparisonEvent& event, int age) {
  const double d = model.beta() * static_cast<double>(age - event.ref_age);
  return event.outcome == Outcome::Older ? d : -d;
}

}  // namespace

double comparison_likelihood(const LogisticModel& model, const ComparisonEvent& event,
                             int age) {
  const double x = signed_gap(model, event, age);
  const double partition = sigmoid(x) + sigmoid(-x);
  return sigmoid(x) / partition;
}

AgeDistribution posterior_from_events(const LogisticModel& model,
                                      const AgeDistribution& prior,
                                      std::span<const ComparisonEvent> events) {
  const AgeGrid& grid = prior.grid();
  for (const auto& e : events) {
    require(grid.contains(e.ref_age),
            "comparison reference age " + std::to_string(e.ref_age) + " outside grid");
  }

  const std::size_t n = grid.size();
  std::vector<double> log_mass(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = prior.mass()[i];
    double acc = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    const int age = grid.age_at(i);
    for (const auto& e : events) {
      const double x = signed_gap(model, e, age);
      const double log_partition = std::log(sigmoid(x) + sigmoid(-x));
      acc += log_sigmoid(x) - log_partition;
    }
    log_mass[i] = acc;
  }

  const double peak = *std::max_element(log_mass.begin(), log_mass.end());
  if (!(peak >= kLogMassFloor)) {
    fail(ErrorCode::DegenerateEvidence,
         "every age bin fell below the likelihood floor; comparisons are irreconcilable");
  }
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = log_mass[i] < kLogMassFloor ? 0.0 : std::exp(log_mass[i] - peak);
  }
  return AgeDistribution::from_weights(grid, std::move(weights));
}

int mode(const AgeDistribution& dist) {
  const auto mass = dist.mass();
  std::size_t best = 0;
  for (std::size_t i = 1; i < mass.size(); ++i) {
    if (mass[i] > mass[best]) best = i;
  }
  return dist.grid().age_at(best);
}

ConfidenceInterval confidence_interval(const AgeDistribution& dist, double level) {
  require(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
  constexpr double slack = 1e-12;
  const auto mass = dist.mass();
  const std::size_t n = mass.size();
  std::vector<double> prefix(n + 1, 0.0);
  std::partial_sum(mass.begin(), mass.end(), prefix.begin() + 1);

  for (std::size_t span = 1; span <= n; ++span) {
    bool found = false;
    ConfidenceInterval best;
    for (std::size_t start = 0; start + span <= n; ++start) {
      const double m = prefix[start + span] - prefix[start];
      if (m < level - slack) continue;
      if (!found || m > best.mass + 1e-15) {
        best = {dist.grid().age_at(start), dist.grid().age_at(start + span - 1), m};
        found = true;
      }
    }
    if (found) return best;
  }
  return {dist.grid().min_age(), dist.grid().max_age(), 1.0};
}

bool is_outlier(const AgeDistribution& dist) {
  return confidence_interval(dist, kOutlierLevel).width() > kOutlierMaxWidth;
}

LogisticModel fit_beta(std::span<const BetaSample> samples, const BetaFitOptions& options) {
  require(samples.size() >= 2, "beta fit needs at least two samples");
  bool distinct = false;
  for (const auto& s : samples) {
    require(std::isfinite(s.frac_older) && s.frac_older >= 0.0 && s.frac_older <= 1.0,
            "older-fraction must lie in [0, 1]");
    if (s.age_diff != samples.front().age_diff) distinct = true;
  }
  require(distinct, "beta fit needs at least two distinct age differences");
  require(options.lower > 0.0 && options.upper > options.lower && options.tolerance > 0.0,
          "invalid beta search bracket");

  const bool uninformative = std::all_of(samples.begin(), samples.end(), [](const BetaSample& s) {
    return s.age_diff == 0 || s.frac_older == 0.5;
  });
  if (uninformative) {
    fail(ErrorCode::FitDiverged, "objective is flat: every observed fraction is 0.5");
  }

  auto objective = [&](double beta) {
    double sse = 0.0;
    for (const auto& s : samples) {
      // Upper-half residuals go through the complementary tail so saturated
      // curves keep a slope once s(x) rounds to 1.
      const double x = beta * s.age_diff;
      const double r = x > 0.0 ? (1.0 - s.frac_older) - sigmoid(-x) : sigmoid(x) - s.frac_older;
      sse += r * r;
    }
    return sse;
  };
  const double beta =
      golden_section_minimize(objective, options.lower, options.upper, options.tolerance);
  if (beta - options.lower <= 2.0 * options.tolerance) {
    fail(ErrorCode::FitDiverged,
         "fit collapsed onto the lower bound; responses carry no age-ordering signal");
  }
  return LogisticModel(beta);
}

}  // namespace agepost
