#pragma once

// Batch workflows behind the command-line front end.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "agepost/metrics.hpp"
#include "agepost/ordinal.hpp"
#include "agepost/pipeline.hpp"
#include "agepost/serialize.hpp"
#include "agepost/simulation.hpp"

namespace agepost::app {

// Reads "age_diff,frac_older" rows; a non-numeric first line is taken as a header.
std::vector<BetaSample> read_beta_csv(const std::filesystem::path& path);

struct CatalogOptions {
  AgeGrid grid;
  std::size_t num_queries = 1000;
  int refs_per_age = 4;
  // Standard deviation of the simulated rough-age hint around the true age.
  double hint_noise = 3.0;
  std::uint64_t seed = 0;
};

struct Catalog {
  std::vector<QueryItem> queries;
  std::vector<ReferenceItem> references;
};

// Queries carry true_age for simulation plus a noisy rough_age_hint.
Catalog synth_catalog(const CatalogOptions& options);

struct LabelOptions {
  AgeGrid grid;
  double beta = kDefaultBeta;
  SelectionPolicy policy;
  bool allow_fallback = false;
  double annotator_beta = kDefaultBeta;
  AnnotatorMode annotator_mode = AnnotatorMode::Stochastic;
  std::uint64_t seed = 0;
};

struct LabelSummary {
  std::size_t labelled = 0;
  std::size_t discarded = 0;
  std::vector<AnnotationRecord> records;
};

// Runs the full protocol per query with a simulated annotator. Every query
// must carry true_age. Selection failures propagate as InsufficientPool.
LabelSummary label_simulated(const std::vector<QueryItem>& queries,
                             const std::vector<ReferenceItem>& references,
                             const LabelOptions& options);

struct AssistSummary {
  std::size_t created = 0;
  std::size_t failed = 0;
  std::vector<Json> responses;
};

// Posts one task per query to a running annotation service.
AssistSummary label_via_service(const std::vector<QueryItem>& queries, const std::string& base_url);

struct DatasetSource {
  std::optional<std::filesystem::path> path;  // JSON lines; else synthetic
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t dim = 16;
  std::uint64_t embedding_seed = kDefaultEmbeddingSeed;
};

// JSON lines of {"x": [...], "age": a} | {"x", "group": [lo, hi|null]} | {"x", "posterior": {...}}.
std::vector<TrainingSample> load_dataset(const std::filesystem::path& path, const AgeGrid& grid);
std::vector<TrainingSample> resolve_dataset(const DatasetSource& source, const AgeGrid& grid);
Json sample_to_json(const TrainingSample& sample);

LossMode parse_loss_mode(std::string_view s);
std::string_view to_string(LossMode m);

// Ground-truth point age used for scoring: the exact age, or the mode of the
// ground-truth posterior for group / posterior labels.
int reference_age(const TrainingSample& sample, const AgeGrid& grid);

MetricReport evaluate_head(const OrdinalHead& head, const std::vector<TrainingSample>& test,
                           LossMode mode);

// Modes of labelled records scored against the queries' true_age.
MetricReport evaluate_annotations(const std::vector<AnnotationRecord>& records,
                                  const std::vector<QueryItem>& queries);

}  // namespace agepost::app
