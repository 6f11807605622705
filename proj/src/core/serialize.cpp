#include "agepost/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace agepost {

namespace {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    fail(ErrorCode::DataError, std::string("missing field \"") + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::DataError, std::string("field \"") + key + "\" has the wrong type");
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(Outcome o) { return o == Outcome::Older ? "older" : "younger"; }

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::Male: return "male";
    case Gender::Female: return "female";
    case Gender::Unknown: break;
  }
  return "unknown";
}

std::string_view to_string(AnnotationStatus s) {
  return s == AnnotationStatus::Labelled ? "labelled" : "discarded";
}

Outcome parse_outcome(std::string_view s) {
  if (s == "older") return Outcome::Older;
  if (s == "younger") return Outcome::Younger;
  fail(ErrorCode::InvalidArgument, "outcome must be \"older\" or \"younger\"");
}

Gender parse_gender(std::string_view s) {
  if (s == "male" || s == "m" || s == "M" || s == "Male") return Gender::Male;
  if (s == "female" || s == "f" || s == "F" || s == "Female") return Gender::Female;
  if (s == "unknown" || s.empty() || s == "Unknown") return Gender::Unknown;
  fail(ErrorCode::DataError, "unrecognized gender \"" + std::string(s) + "\"");
}

Json grid_to_json(const AgeGrid& grid) {
  return {{"min_age", grid.min_age()}, {"max_age", grid.max_age()}};
}

AgeGrid grid_from_json(const Json& j) {
  return AgeGrid(field<int>(j, "min_age"), field<int>(j, "max_age"));
}

Json distribution_to_json(const AgeDistribution& dist) {
  Json j = grid_to_json(dist.grid());
  j["mass"] = std::vector<double>(dist.mass().begin(), dist.mass().end());
  return j;
}

AgeDistribution distribution_from_json(const Json& j) {
  return AgeDistribution(grid_from_json(j), field<std::vector<double>>(j, "mass"));
}

Json event_to_json(const ComparisonEvent& e) {
  return {{"ref_id", e.ref_id},
          {"ref_age", e.ref_age},
          {"outcome", to_string(e.outcome)},
          {"annotator_id", e.annotator_id},
          {"timestamp", e.timestamp}};
}

ComparisonEvent event_from_json(const Json& j) {
  ComparisonEvent e;
  e.ref_id = j.value("ref_id", std::string{});
  e.ref_age = field<int>(j, "ref_age");
  e.outcome = parse_outcome(field<std::string>(j, "outcome"));
  e.annotator_id = j.value("annotator_id", std::string{});
  e.timestamp = j.value("timestamp", std::string{});
  return e;
}

Json reference_to_json(const ReferenceItem& r) {
  return {{"id", r.id}, {"image_uri", r.image_uri}, {"age", r.age}, {"gender", to_string(r.gender)}};
}

ReferenceItem reference_from_json(const Json& j) {
  ReferenceItem r;
  r.id = field<std::string>(j, "id");
  r.image_uri = j.value("image_uri", std::string{});
  r.age = field<int>(j, "age");
  r.gender = parse_gender(j.value("gender", std::string{}));
  return r;
}

Json query_to_json(const QueryItem& q) {
  Json j{{"id", q.id}, {"image_uri", q.image_uri}, {"gender", to_string(q.gender)}};
  if (q.rough_age_hint) j["rough_age_hint"] = *q.rough_age_hint;
  if (q.true_age) j["true_age"] = *q.true_age;
  return j;
}

QueryItem query_from_json(const Json& j) {
  QueryItem q;
  q.id = field<std::string>(j, "id");
  q.image_uri = j.value("image_uri", std::string{});
  q.gender = parse_gender(j.value("gender", std::string{}));
  if (j.contains("rough_age_hint") && !j["rough_age_hint"].is_null()) {
    q.rough_age_hint = field<int>(j, "rough_age_hint");
  }
  if (j.contains("true_age") && !j["true_age"].is_null()) q.true_age = field<int>(j, "true_age");
  return q;
}

Json record_to_json(const AnnotationRecord& r) {
  Json events = Json::array();
  for (const auto& e : r.events) events.push_back(event_to_json(e));
  return {{"query_id", r.query_id},
          {"posterior", distribution_to_json(r.posterior)},
          {"mode", r.mode},
          {"ci90", {r.ci_lo, r.ci_hi}},
          {"events", std::move(events)},
          {"status", to_string(r.status)}};
}

AnnotationRecord record_from_json(const Json& j) {
  const auto ci = field<std::vector<int>>(j, "ci90");
  if (ci.size() != 2) fail(ErrorCode::DataError, "ci90 must hold two ages");
  std::vector<ComparisonEvent> events;
  for (const auto& e : field<Json>(j, "events")) events.push_back(event_from_json(e));
  const auto status = field<std::string>(j, "status");
  if (status != "labelled" && status != "discarded") {
    fail(ErrorCode::DataError, "status must be labelled or discarded");
  }
  return AnnotationRecord{field<std::string>(j, "query_id"),
                          distribution_from_json(field<Json>(j, "posterior")),
                          field<int>(j, "mode"),
                          ci[0],
                          ci[1],
                          std::move(events),
                          status == "labelled" ? AnnotationStatus::Labelled
                                               : AnnotationStatus::Discarded};
}

Json checkpoint_to_json(const OrdinalHead& head) {
  Json rows = Json::array();
  const auto w = head.weights();
  for (std::size_t k = 0; k < head.ranks(); ++k) {
    const auto row = w.subspan(k * head.row_stride(), head.row_stride());
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"K", head.ranks()},
          {"d", head.feature_dim()},
          {"beta", head.beta()},
          {"grid", grid_to_json(head.grid())},
          {"weights", std::move(rows)}};
}

OrdinalHead checkpoint_from_json(const Json& j) {
  const auto ranks = field<std::size_t>(j, "K");
  const auto dim = field<std::size_t>(j, "d");
  const auto rows = field<std::vector<std::vector<double>>>(j, "weights");
  if (rows.size() != ranks) fail(ErrorCode::DataError, "checkpoint has the wrong number of rows");
  std::vector<double> flat;
  for (const auto& row : rows) {
    if (row.size() != dim + 1) fail(ErrorCode::DataError, "checkpoint row has the wrong width");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return OrdinalHead(grid_from_json(field<Json>(j, "grid")), dim, field<double>(j, "beta"), ranks,
                     std::move(flat));
}

Json metric_report_to_json(const MetricReport& r) {
  Json ca = Json::object();
  for (const auto& [n, v] : r.ca) ca[std::to_string(n)] = v;
  return {{"count", r.count},
          {"mae", r.mae},
          {"exact_group_acc", r.exact_group_acc},
          {"one_off_acc", r.one_off_acc},
          {"ca", std::move(ca)},
          {"recall_pm3", r.recall_pm3},
          {"ca_rule", "abs_error <= n"}};
}

std::string loss_trace_csv(const std::vector<LossTracePoint>& trace) {
  std::string out = "epoch,loss_hyper,loss_kl,loss_total\n";
  for (const auto& p : trace) {
    out += std::to_string(p.epoch) + ',' + format_double(p.loss_hyper) + ',' +
           format_double(p.loss_kl) + ',' + format_double(p.loss_total) + '\n';
  }
  return out;
}

std::string narrowing_csv(const std::vector<NarrowingRow>& rows) {
  std::string out = "M,median_width,p10_width,p90_width,frac_lt8,frac_gt15,discard_rate\n";
  for (const auto& r : rows) {
    out += std::to_string(r.comparisons) + ',' + format_double(r.median_width) + ',' +
           format_double(r.p10_width) + ',' + format_double(r.p90_width) + ',' +
           format_double(r.frac_lt8) + ',' + format_double(r.frac_gt15) + ',' +
           format_double(r.discard_rate) + '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << contents;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::DataError,
           path.string() + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
  }
  return out;
}

namespace {

template <typename T, typename Parse>
std::vector<T> load_items(const std::filesystem::path& path, Parse parse) {
  std::vector<T> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(parse(j));
    } catch (const Error& e) {
      fail(ErrorCode::DataError, path.string() + ": record " + std::to_string(line) + ": " + e.what());
    } catch (const Json::exception& e) {
      fail(ErrorCode::DataError, path.string() + ": record " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<ReferenceItem> load_references(const std::filesystem::path& path) {
  return load_items<ReferenceItem>(path, reference_from_json);
}

std::vector<QueryItem> load_queries(const std::filesystem::path& path) {
  return load_items<QueryItem>(path, query_from_json);
}

}  // namespace agepost
