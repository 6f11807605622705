#include "agepost/app.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace agepost::app {

namespace {

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace

std::vector<BetaSample> read_beta_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<BetaSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    double diff = 0.0;
    double frac = 0.0;
    const bool ok = comma != std::string::npos &&
                    parse_double(std::string_view(line).substr(0, comma), diff) &&
                    parse_double(std::string_view(line).substr(comma + 1), frac);
    if (!ok) {
      if (out.empty() && line_no == 1) continue;  // header
      fail(ErrorCode::DataError, path.string() + ":" + std::to_string(line_no) +
                                     ": expected age_diff,frac_older");
    }
    if (diff != std::round(diff)) {
      fail(ErrorCode::DataError, path.string() + ":" + std::to_string(line_no) +
                                     ": age_diff must be a whole number of years");
    }
    out.push_back({static_cast<int>(diff), frac});
  }
  return out;
}

Catalog synth_catalog(const CatalogOptions& options) {
  require(options.refs_per_age >= 1, "refs_per_age must be >= 1");
  require(options.hint_noise >= 0.0, "hint noise must be non-negative");
  const AgeGrid& grid = options.grid;
  Rng rng(options.seed);
  Catalog cat;
  const Gender genders[] = {Gender::Male, Gender::Female};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int age = grid.age_at(i);
    for (int r = 0; r < options.refs_per_age; ++r) {
      const std::string id = "ref-" + std::to_string(age) + "-" + std::to_string(r);
      cat.references.push_back({id, "refs/" + id + ".jpg", age, genders[r % 2]});
    }
  }
  for (std::size_t q = 0; q < options.num_queries; ++q) {
    const int age = rng.uniform_int(grid.min_age(), grid.max_age());
    const Gender g = genders[rng.index(2)];
    int hint = static_cast<int>(std::lround(age + rng.normal(0.0, options.hint_noise)));
    hint = std::clamp(hint, grid.min_age(), grid.max_age());
    const std::string id = "q" + std::to_string(q);
    cat.queries.push_back({id, "queries/" + id + ".jpg", g, hint, age});
  }
  return cat;
}

LabelSummary label_simulated(const std::vector<QueryItem>& queries,
                             const std::vector<ReferenceItem>& references,
                             const LabelOptions& options) {
  const LogisticModel model(options.beta);
  const auto prior = AgeDistribution::uniform(options.grid);
  for (const auto& r : references) {
    if (!options.grid.contains(r.age)) {
      fail(ErrorCode::DataError, "reference " + r.id + " has age outside the grid");
    }
  }

  LabelSummary summary;
  for (const auto& query : queries) {
    if (!query.true_age) {
      fail(ErrorCode::DataError, "query " + query.id + " has no true_age; cannot simulate");
    }
    if (!options.grid.contains(*query.true_age)) {
      fail(ErrorCode::DataError, "query " + query.id + " true_age outside the grid");
    }
    const int rough = std::clamp(rough_age_estimate(query, options.grid), options.grid.min_age(),
                                 options.grid.max_age());
    const auto refs = options.allow_fallback
                          ? select_references_with_fallback(query, references, options.policy, rough)
                                .references
                          : select_references(query, references, options.policy, rough);

    SimulatedAnnotator annotator(options.annotator_beta,
                                 derive_seed(options.seed, hash_string(query.id)),
                                 options.annotator_mode);
    std::vector<ComparisonEvent> events;
    for (const auto& ref : refs) {
      auto e = annotator.simulate_comparison(*query.true_age, ref.age);
      e.ref_id = ref.id;
      events.push_back(std::move(e));
    }
    auto record = finalize_annotation(query.id, events, model, prior);
    if (record.status == AnnotationStatus::Labelled) ++summary.labelled;
    else ++summary.discarded;
    summary.records.push_back(std::move(record));
  }
  return summary;
}

AssistSummary label_via_service(const std::vector<QueryItem>& queries, const std::string& base_url) {
  httplib::Client client(base_url);
  client.set_connection_timeout(5);
  AssistSummary summary;
  for (const auto& q : queries) {
    QueryItem sent = q;
    sent.true_age.reset();
    const Json body{{"query", query_to_json(sent)}};
    auto res = client.Post("/tasks", body.dump(), "application/json");
    if (!res) {
      fail(ErrorCode::IoError, "annotation service at " + base_url + " unreachable: " +
                                   httplib::to_string(res.error()));
    }
    Json reply = Json::parse(res->body, nullptr, false);
    if (res->status == 201) ++summary.created;
    else ++summary.failed;
    summary.responses.push_back({{"query_id", q.id}, {"status", res->status}, {"body", reply}});
  }
  return summary;
}

LossMode parse_loss_mode(std::string_view s) {
  if (s == "both") return LossMode::Both;
  if (s == "hyper" || s == "hyper-only") return LossMode::HyperOnly;
  if (s == "kl" || s == "kl-only") return LossMode::KlOnly;
  fail(ErrorCode::InvalidArgument, "loss mode must be both, hyper or kl");
}

std::string_view to_string(LossMode m) {
  switch (m) {
    case LossMode::HyperOnly: return "hyper";
    case LossMode::KlOnly: return "kl";
    case LossMode::Both: break;
  }
  return "both";
}

Json sample_to_json(const TrainingSample& sample) {
  Json j{{"x", sample.features}};
  if (const auto* e = std::get_if<ExactAge>(&sample.label)) {
    j["age"] = e->age;
  } else if (const auto* g = std::get_if<AgeGroup>(&sample.label)) {
    j["group"] = {g->lo, g->hi ? Json(*g->hi) : Json(nullptr)};
  } else {
    j["posterior"] = distribution_to_json(std::get<RawPosterior>(sample.label).dist);
  }
  return j;
}

std::vector<TrainingSample> load_dataset(const std::filesystem::path& path, const AgeGrid& grid) {
  std::vector<TrainingSample> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    const std::string where = path.string() + ": record " + std::to_string(line);
    try {
      TrainingSample s;
      s.features = j.at("x").get<std::vector<double>>();
      if (j.contains("age")) {
        s.label = ExactAge{j.at("age").get<int>()};
      } else if (j.contains("group")) {
        const auto& g = j.at("group");
        AgeGroup group{g.at(0).get<int>(), std::nullopt};
        if (!g.at(1).is_null()) group.hi = g.at(1).get<int>();
        s.label = group;
      } else if (j.contains("posterior")) {
        s.label = RawPosterior{distribution_from_json(j.at("posterior"))};
      } else {
        fail(ErrorCode::DataError, where + ": needs one of age, group, posterior");
      }
      (void)build_gt_posterior(s.label, grid);
      out.push_back(std::move(s));
    } catch (const Json::exception& e) {
      fail(ErrorCode::DataError, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DataError) throw;
      fail(ErrorCode::DataError, where + ": " + e.what());
    }
  }
  if (out.empty()) fail(ErrorCode::DataError, path.string() + " holds no samples");
  return out;
}

std::vector<TrainingSample> resolve_dataset(const DatasetSource& source, const AgeGrid& grid) {
  if (source.path) return load_dataset(*source.path, grid);
  return synth_dataset(source.n, source.seed, grid, source.dim, source.embedding_seed);
}

int reference_age(const TrainingSample& sample, const AgeGrid& grid) {
  if (const auto* e = std::get_if<ExactAge>(&sample.label)) return e->age;
  return mode(build_gt_posterior(sample.label, grid));
}

MetricReport evaluate_head(const OrdinalHead& head, const std::vector<TrainingSample>& test,
                           LossMode mode) {
  std::vector<int> predicted;
  std::vector<int> truth;
  for (const auto& s : test) {
    predicted.push_back(predict_age(head, s.features, mode));
    truth.push_back(reference_age(s, head.grid()));
  }
  return evaluate(predicted, truth);
}

MetricReport evaluate_annotations(const std::vector<AnnotationRecord>& records,
                                  const std::vector<QueryItem>& queries) {
  std::unordered_map<std::string, int> truth_by_id;
  for (const auto& q : queries) {
    if (q.true_age) truth_by_id[q.id] = *q.true_age;
  }
  std::vector<int> predicted;
  std::vector<int> truth;
  for (const auto& r : records) {
    if (r.status != AnnotationStatus::Labelled) continue;
    const auto it = truth_by_id.find(r.query_id);
    if (it == truth_by_id.end()) {
      fail(ErrorCode::DataError, "no true_age for annotated query " + r.query_id);
    }
    predicted.push_back(r.mode);
    truth.push_back(it->second);
  }
  return evaluate(predicted, truth);
}

}  // namespace agepost::app
