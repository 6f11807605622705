#pragma once

// Labelling protocol: bracketing reference selection, ground-truth posterior
// construction and the outlier-filtered finalization of a query.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "agepost/posterior.hpp"
#include "agepost/random.hpp"

namespace agepost {

enum class Gender { Male, Female, Unknown };

struct ReferenceItem {
  std::string id;
  std::string image_uri;
  int age = 0;
  Gender gender = Gender::Unknown;

  friend bool operator==(const ReferenceItem&, const ReferenceItem&) = default;
};

struct QueryItem {
  std::string id;
  std::string image_uri;
  Gender gender = Gender::Unknown;
  std::optional<int> rough_age_hint;
  // Known age for simulated catalogs only; never read by the labelling path.
  std::optional<int> true_age;

  friend bool operator==(const QueryItem&, const QueryItem&) = default;
};

struct SelectionPolicy {
  int num_below = 3;
  int num_above = 3;
  bool gender_match_required = true;
  std::uint64_t rng_seed = 0;
  // References further than this from the rough age are skipped; 0 = no limit.
  int max_age_gap = 0;

  void validate() const;
};

enum class SelectionFallback { None, RelaxedGender, WidenedStratum };

struct Selection {
  std::vector<ReferenceItem> references;
  SelectionFallback fallback = SelectionFallback::None;
};

// num_below references strictly younger than rough_age followed by num_above
// strictly older, drawn uniformly without replacement within each stratum.
// Throws InsufficientPool when a stratum cannot be filled.
std::vector<ReferenceItem> select_references(const QueryItem& query,
                                             std::span<const ReferenceItem> pool,
                                             const SelectionPolicy& policy, int rough_age,
                                             Rng& rng);

// Same, with the generator seeded from policy.rng_seed and the query id.
std::vector<ReferenceItem> select_references(const QueryItem& query,
                                             std::span<const ReferenceItem> pool,
                                             const SelectionPolicy& policy, int rough_age);

// Strict selection, then without the gender constraint, then with strata
// widened to <= / >= rough_age. Throws InsufficientPool if all three fail.
Selection select_references_with_fallback(const QueryItem& query,
                                          std::span<const ReferenceItem> pool,
                                          const SelectionPolicy& policy, int rough_age);

std::uint64_t selection_seed(const SelectionPolicy& policy, const QueryItem& query);

int rough_age_estimate(const QueryItem& query, int fallback);
int rough_age_estimate(const QueryItem& query, const AgeGrid& grid);

struct ExactAge {
  int age = 0;
};

// Inclusive range; an absent upper bound runs to the top of the grid.
struct AgeGroup {
  int lo = 0;
  std::optional<int> hi;
};

struct RawPosterior {
  AgeDistribution dist;
};

using GroundTruthSpec = std::variant<ExactAge, AgeGroup, RawPosterior>;

inline constexpr double kGroundTruthSigma = 2.0;

AgeDistribution build_gt_posterior(const GroundTruthSpec& spec, const AgeGrid& grid);

enum class AnnotationStatus { Labelled, Discarded };

struct AnnotationRecord {
  std::string query_id;
  AgeDistribution posterior;
  int mode = 0;
  int ci_lo = 0;
  int ci_hi = 0;
  std::vector<ComparisonEvent> events;
  AnnotationStatus status = AnnotationStatus::Labelled;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

// Posterior, mode and 90% interval of a finished query. Outliers come back
// with status Discarded and the posterior kept for audit.
AnnotationRecord finalize_annotation(std::string query_id, std::span<const ComparisonEvent> events,
                                     const LogisticModel& model, const AgeDistribution& prior);

}  // namespace agepost
