#include "agepost/pipeline.hpp"

#include <cmath>
#include <utility>

namespace agepost {

void SelectionPolicy::validate() const {
  require(num_below >= 0 && num_above >= 0, "reference counts must be non-negative");
  require(num_below + num_above >= 1, "policy must request at least one reference");
  require(max_age_gap >= 0, "max_age_gap must be non-negative");
}

namespace {

enum class Bound { Strict, Inclusive };

struct StratumFilter {
  bool gender_match = true;
  Bound bound = Bound::Strict;
};

bool gender_ok(const QueryItem& query, const ReferenceItem& ref, bool required) {
  if (!required || query.gender == Gender::Unknown) return true;
  return ref.gender == query.gender;
}

std::vector<std::size_t> draw(std::vector<std::size_t> candidates, int count, Rng& rng) {
  // Partial Fisher-Yates; the first `count` slots are the sample.
  const auto n = candidates.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(static_cast<std::size_t>(count));
  return candidates;
}

std::vector<ReferenceItem> select_impl(const QueryItem& query, std::span<const ReferenceItem> pool,
                                       const SelectionPolicy& policy, int rough_age, Rng& rng,
                                       StratumFilter filter) {
  policy.validate();
  if (pool.empty()) fail(ErrorCode::InsufficientPool, "reference pool is empty");

  const bool inclusive = filter.bound == Bound::Inclusive;
  auto within_gap = [&](int age) {
    return policy.max_age_gap == 0 || std::abs(age - rough_age) <= policy.max_age_gap;
  };

  std::vector<std::size_t> below;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& r = pool[i];
    if (!gender_ok(query, r, filter.gender_match) || !within_gap(r.age)) continue;
    if (r.age < rough_age || (inclusive && r.age == rough_age)) below.push_back(i);
  }
  if (below.size() < static_cast<std::size_t>(policy.num_below)) {
    fail(ErrorCode::InsufficientPool,
         "only " + std::to_string(below.size()) + " references below age " +
             std::to_string(rough_age) + " for query " + query.id + ", need " +
             std::to_string(policy.num_below));
  }
  auto picked_below = draw(std::move(below), policy.num_below, rng);

  std::vector<std::size_t> above;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& r = pool[i];
    if (!gender_ok(query, r, filter.gender_match) || !within_gap(r.age)) continue;
    if (!(r.age > rough_age || (inclusive && r.age == rough_age))) continue;
    bool taken = false;
    for (auto b : picked_below) taken = taken || b == i;
    if (!taken) above.push_back(i);
  }
  if (above.size() < static_cast<std::size_t>(policy.num_above)) {
    fail(ErrorCode::InsufficientPool,
         "only " + std::to_string(above.size()) + " references above age " +
             std::to_string(rough_age) + " for query " + query.id + ", need " +
             std::to_string(policy.num_above));
  }
  auto picked_above = draw(std::move(above), policy.num_above, rng);

  std::vector<ReferenceItem> out;
  out.reserve(picked_below.size() + picked_above.size());
  for (auto i : picked_below) out.push_back(pool[i]);
  for (auto i : picked_above) out.push_back(pool[i]);
  return out;
}

}  // namespace

std::uint64_t selection_seed(const SelectionPolicy& policy, const QueryItem& query) {
  return derive_seed(policy.rng_seed, hash_string(query.id));
}

std::vector<ReferenceItem> select_references(const QueryItem& query,
                                             std::span<const ReferenceItem> pool,
                                             const SelectionPolicy& policy, int rough_age,
                                             Rng& rng) {
  return select_impl(query, pool, policy, rough_age, rng,
                     {policy.gender_match_required, Bound::Strict});
}

std::vector<ReferenceItem> select_references(const QueryItem& query,
                                             std::span<const ReferenceItem> pool,
                                             const SelectionPolicy& policy, int rough_age) {
  Rng rng(selection_seed(policy, query));
  return select_references(query, pool, policy, rough_age, rng);
}

// TODO: pick the next reference from the current posterior (median or CI edges) instead of
// fixing all of them from the rough age up front; fixed strata cap how fast the CI narrows.
Selection select_references_with_fallback(const QueryItem& query,
                                          std::span<const ReferenceItem> pool,
                                          const SelectionPolicy& policy, int rough_age) {
  const StratumFilter attempts[] = {
      {policy.gender_match_required, Bound::Strict},
      {false, Bound::Strict},
      {false, Bound::Inclusive},
  };
  const SelectionFallback labels[] = {SelectionFallback::None, SelectionFallback::RelaxedGender,
                                      SelectionFallback::WidenedStratum};
  std::string last_error;
  for (int i = 0; i < 3; ++i) {
    Rng rng(selection_seed(policy, query));
    try {
      return {select_impl(query, pool, policy, rough_age, rng, attempts[i]), labels[i]};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPool) throw;
      last_error = e.what();
    }
  }
  fail(ErrorCode::InsufficientPool, last_error + " (after relaxing gender and widening strata)");
}

int rough_age_estimate(const QueryItem& query, int fallback) {
  return query.rough_age_hint.value_or(fallback);
}

int rough_age_estimate(const QueryItem& query, const AgeGrid& grid) {
  return rough_age_estimate(query, grid.midpoint());
}

AgeDistribution build_gt_posterior(const GroundTruthSpec& spec, const AgeGrid& grid) {
  struct Visitor {
    const AgeGrid& grid;

    AgeDistribution operator()(const ExactAge& exact) const {
      require(grid.contains(exact.age), "exact age outside grid");
      std::vector<double> w(grid.size());
      const double two_var = 2.0 * kGroundTruthSigma * kGroundTruthSigma;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = grid.age_at(i) - exact.age;
        w[i] = std::exp(-d * d / two_var);
      }
      return AgeDistribution::from_weights(grid, std::move(w));
    }

    AgeDistribution operator()(const AgeGroup& group) const {
      const int hi = group.hi.value_or(grid.max_age());
      require(group.lo <= hi, "age group lower bound exceeds upper bound");
      std::vector<double> w(grid.size(), 0.0);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const int age = grid.age_at(i);
        if (age >= group.lo && age <= hi) w[i] = 1.0;
      }
      return AgeDistribution::from_weights(grid, std::move(w));
    }

    AgeDistribution operator()(const RawPosterior& raw) const {
      require(raw.dist.grid() == grid, "raw posterior grid does not match");
      const auto m = raw.dist.mass();
      return AgeDistribution::from_weights(grid, {m.begin(), m.end()});
    }
  };
  return std::visit(Visitor{grid}, spec);
}

AnnotationRecord finalize_annotation(std::string query_id, std::span<const ComparisonEvent> events,
                                     const LogisticModel& model, const AgeDistribution& prior) {
  if (events.empty()) fail(ErrorCode::NoEvidence, "no comparisons recorded for " + query_id);
  auto posterior = posterior_from_events(model, prior, events);
  const auto ci = confidence_interval(posterior, kOutlierLevel);
  const int peak = mode(posterior);
  const auto status =
      ci.width() > kOutlierMaxWidth ? AnnotationStatus::Discarded : AnnotationStatus::Labelled;
  return AnnotationRecord{std::move(query_id),
                          std::move(posterior),
                          peak,
                          ci.lo,
                          ci.hi,
                          {events.begin(), events.end()},
                          status};
}

}  // namespace agepost
