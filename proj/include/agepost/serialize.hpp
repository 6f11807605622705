#pragma once

// JSON / JSON-lines / CSV encodings for every exchanged record.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agepost/metrics.hpp"
#include "agepost/ordinal.hpp"
#include "agepost/pipeline.hpp"
#include "agepost/posterior.hpp"
#include "agepost/simulation.hpp"

namespace agepost {

using Json = nlohmann::json;

std::string_view to_string(Outcome o);
std::string_view to_string(Gender g);
std::string_view to_string(AnnotationStatus s);
Outcome parse_outcome(std::string_view s);
Gender parse_gender(std::string_view s);

Json grid_to_json(const AgeGrid& grid);
AgeGrid grid_from_json(const Json& j);

// {"min_age", "max_age", "mass": [...]}
Json distribution_to_json(const AgeDistribution& dist);
AgeDistribution distribution_from_json(const Json& j);

Json event_to_json(const ComparisonEvent& e);
ComparisonEvent event_from_json(const Json& j);

Json reference_to_json(const ReferenceItem& r);
ReferenceItem reference_from_json(const Json& j);
Json query_to_json(const QueryItem& q);
QueryItem query_from_json(const Json& j);

Json record_to_json(const AnnotationRecord& r);
AnnotationRecord record_from_json(const Json& j);

// {"K", "d", "beta", "grid": {...}, "weights": [[...], ...]}
Json checkpoint_to_json(const OrdinalHead& head);
OrdinalHead checkpoint_from_json(const Json& j);

Json metric_report_to_json(const MetricReport& r);

// epoch,loss_hyper,loss_kl,loss_total
std::string loss_trace_csv(const std::vector<LossTracePoint>& trace);
// M,median_width,p10_width,p90_width,frac_lt8,frac_gt15,discard_rate
std::string narrowing_csv(const std::vector<NarrowingRow>& rows);

// Parses each non-blank line. Throws IoError / DataError (with line number).
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::vector<ReferenceItem> load_references(const std::filesystem::path& path);
std::vector<QueryItem> load_queries(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace agepost
