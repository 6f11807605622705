#include "agepost/agepost.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include "agepost/app.hpp"
#include "agepost/http_api.hpp"
#include "agepost/service.hpp"

struct agepost_dist {
  agepost::AgeDistribution value;
};

struct agepost_head {
  agepost::OrdinalHead value;
};

struct agepost_service {
  std::unique_ptr<agepost::AnnotationService> service;
  std::unique_ptr<agepost::HttpServer> http;
};

namespace {

thread_local std::string last_error;

agepost_status status_of(agepost::ErrorCode code) {
  using agepost::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return AGEPOST_ERR_INVALID_ARGUMENT;
    case ErrorCode::DegenerateEvidence: return AGEPOST_ERR_DEGENERATE_EVIDENCE;
    case ErrorCode::FitDiverged: return AGEPOST_ERR_FIT_DIVERGED;
    case ErrorCode::InsufficientPool: return AGEPOST_ERR_INSUFFICIENT_POOL;
    case ErrorCode::EmptySupport: return AGEPOST_ERR_EMPTY_SUPPORT;
    case ErrorCode::NoEvidence: return AGEPOST_ERR_NO_EVIDENCE;
    case ErrorCode::DimensionMismatch: return AGEPOST_ERR_DIMENSION_MISMATCH;
    case ErrorCode::NonFiniteLoss: return AGEPOST_ERR_NON_FINITE_LOSS;
    case ErrorCode::LengthMismatch: return AGEPOST_ERR_LENGTH_MISMATCH;
    case ErrorCode::DuplicateQuery: return AGEPOST_ERR_DUPLICATE_QUERY;
    case ErrorCode::UnknownTask: return AGEPOST_ERR_UNKNOWN_TASK;
    case ErrorCode::TaskClosed: return AGEPOST_ERR_TASK_CLOSED;
    case ErrorCode::OutOfOrderReference: return AGEPOST_ERR_OUT_OF_ORDER_REFERENCE;
    case ErrorCode::UnknownReference: return AGEPOST_ERR_UNKNOWN_REFERENCE;
    case ErrorCode::QueueNotExhausted: return AGEPOST_ERR_QUEUE_NOT_EXHAUSTED;
    case ErrorCode::DataError: return AGEPOST_ERR_DATA;
    case ErrorCode::IoError: return AGEPOST_ERR_IO;
  }
  return AGEPOST_ERR_INTERNAL;
}

template <typename F>
agepost_status try_(F&& f) {
  last_error.clear();
  try {
    f();
    return AGEPOST_OK;
  } catch (const agepost::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return AGEPOST_ERR_INTERNAL;
}

template <typename T>
T& deref(T* p, const char* name) {
  if (p == nullptr) agepost::fail(agepost::ErrorCode::InvalidArgument, std::string(name) + " is null");
  return *p;
}

// Strings are checked, not dereferenced.
const char* deref(const char* p, const char* name) {
  if (p == nullptr) agepost::fail(agepost::ErrorCode::InvalidArgument, std::string(name) + " is null");
  return p;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::optional<std::string> opt_path(const char* s) {
  if (s == nullptr || *s == '\0') return std::nullopt;
  return std::string(s);
}

agepost::AgeGrid to_grid(const agepost_grid_options& g) { return agepost::AgeGrid(g.min_age, g.max_age); }

agepost::SelectionPolicy to_policy(const agepost_policy_options& p) {
  agepost::SelectionPolicy policy;
  policy.num_below = p.num_below;
  policy.num_above = p.num_above;
  policy.gender_match_required = p.gender_match_required != 0;
  policy.max_age_gap = p.max_age_gap;
  policy.rng_seed = p.seed;
  policy.validate();
  return policy;
}

agepost::app::DatasetSource to_source(const agepost_dataset_options& d) {
  agepost::app::DatasetSource src;
  if (auto p = opt_path(d.path)) src.path = *p;
  src.n = d.n;
  src.seed = d.seed;
  src.dim = d.dim;
  return src;
}

}  // namespace

extern "C" {

const char* agepost_version(void) { return "1.0.0"; }

const char* agepost_status_name(agepost_status status) {
  switch (status) {
    case AGEPOST_OK: return "Ok";
    case AGEPOST_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case AGEPOST_ERR_DEGENERATE_EVIDENCE: return "DegenerateEvidence";
    case AGEPOST_ERR_FIT_DIVERGED: return "FitDiverged";
    case AGEPOST_ERR_INSUFFICIENT_POOL: return "InsufficientPool";
    case AGEPOST_ERR_EMPTY_SUPPORT: return "EmptySupport";
    case AGEPOST_ERR_NO_EVIDENCE: return "NoEvidence";
    case AGEPOST_ERR_DIMENSION_MISMATCH: return "DimensionMismatch";
    case AGEPOST_ERR_NON_FINITE_LOSS: return "NonFiniteLoss";
    case AGEPOST_ERR_LENGTH_MISMATCH: return "LengthMismatch";
    case AGEPOST_ERR_DUPLICATE_QUERY: return "DuplicateQuery";
    case AGEPOST_ERR_UNKNOWN_TASK: return "UnknownTask";
    case AGEPOST_ERR_TASK_CLOSED: return "TaskClosed";
    case AGEPOST_ERR_OUT_OF_ORDER_REFERENCE: return "OutOfOrderReference";
    case AGEPOST_ERR_UNKNOWN_REFERENCE: return "UnknownReference";
    case AGEPOST_ERR_QUEUE_NOT_EXHAUSTED: return "QueueNotExhausted";
    case AGEPOST_ERR_DATA: return "DataError";
    case AGEPOST_ERR_IO: return "IoError";
    case AGEPOST_ERR_INTERNAL: break;
  }
  return "Internal";
}

const char* agepost_last_error(void) { return last_error.c_str(); }

void agepost_string_free(char* s) { std::free(s); }

agepost_status agepost_comparison_likelihood(double beta, int ref_age, agepost_outcome outcome,
                                             int age, double* out) {
  return try_([&] {
    agepost::ComparisonEvent e;
    e.ref_age = ref_age;
    e.outcome = outcome == AGEPOST_OLDER ? agepost::Outcome::Older : agepost::Outcome::Younger;
    deref(out, "out") = agepost::comparison_likelihood(agepost::LogisticModel(beta), e, age);
  });
}

agepost_status agepost_posterior(int min_age, int max_age, double beta, const agepost_event* events,
                                 size_t n_events, agepost_dist** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    if (n_events > 0) deref(events, "events");
    const agepost::AgeGrid grid(min_age, max_age);
    std::vector<agepost::ComparisonEvent> list(n_events);
    for (size_t i = 0; i < n_events; ++i) {
      list[i].ref_age = events[i].ref_age;
      list[i].outcome =
          events[i].outcome == AGEPOST_OLDER ? agepost::Outcome::Older : agepost::Outcome::Younger;
    }
    auto post = agepost::posterior_from_events(agepost::LogisticModel(beta),
                                               agepost::AgeDistribution::uniform(grid), list);
    slot = new agepost_dist{std::move(post)};
  });
}

agepost_status agepost_gt_exact(int min_age, int max_age, int age, agepost_dist** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    slot = new agepost_dist{
        agepost::build_gt_posterior(agepost::ExactAge{age}, agepost::AgeGrid(min_age, max_age))};
  });
}

agepost_status agepost_gt_group(int min_age, int max_age, int lo, int hi, agepost_dist** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    agepost::AgeGroup group{lo, hi < 0 ? std::nullopt : std::optional<int>(hi)};
    slot = new agepost_dist{agepost::build_gt_posterior(group, agepost::AgeGrid(min_age, max_age))};
  });
}

agepost_status agepost_dist_from_json(const char* json, agepost_dist** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    const auto j = agepost::Json::parse(deref(json, "json"), nullptr, false);
    if (j.is_discarded()) agepost::fail(agepost::ErrorCode::DataError, "malformed JSON");
    slot = new agepost_dist{agepost::distribution_from_json(j)};
  });
}

size_t agepost_dist_size(const agepost_dist* dist) {
  return dist == nullptr ? 0 : dist->value.grid().size();
}

agepost_status agepost_dist_grid(const agepost_dist* dist, int* min_age, int* max_age) {
  return try_([&] {
    const auto& g = deref(dist, "dist").value.grid();
    deref(min_age, "min_age") = g.min_age();
    deref(max_age, "max_age") = g.max_age();
  });
}

agepost_status agepost_dist_mass(const agepost_dist* dist, double* out, size_t len) {
  return try_([&] {
    const auto mass = deref(dist, "dist").value.mass();
    deref(out, "out");
    agepost::require(len >= mass.size(), "output buffer too small");
    std::copy(mass.begin(), mass.end(), out);
  });
}

agepost_status agepost_dist_mode(const agepost_dist* dist, int* age) {
  return try_([&] { deref(age, "age") = agepost::mode(deref(dist, "dist").value); });
}

agepost_status agepost_dist_ci(const agepost_dist* dist, double level, int* lo, int* hi) {
  return try_([&] {
    const auto ci = agepost::confidence_interval(deref(dist, "dist").value, level);
    deref(lo, "lo") = ci.lo;
    deref(hi, "hi") = ci.hi;
  });
}

agepost_status agepost_dist_is_outlier(const agepost_dist* dist, int* outlier) {
  return try_([&] { deref(outlier, "outlier") = agepost::is_outlier(deref(dist, "dist").value) ? 1 : 0; });
}

agepost_status agepost_dist_to_json(const agepost_dist* dist, char** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    slot = copy_string(agepost::distribution_to_json(deref(dist, "dist").value).dump());
  });
}

void agepost_dist_free(agepost_dist* dist) { delete dist; }

agepost_status agepost_fit_beta(const int* age_diffs, const double* frac_older, size_t n,
                                double* beta) {
  return try_([&] {
    auto& slot = deref(beta, "beta");
    if (n > 0) {
      deref(age_diffs, "age_diffs");
      deref(frac_older, "frac_older");
    }
    std::vector<agepost::BetaSample> samples(n);
    for (size_t i = 0; i < n; ++i) samples[i] = {age_diffs[i], frac_older[i]};
    slot = agepost::fit_beta(samples).beta();
  });
}

agepost_status agepost_head_create(int min_age, int max_age, size_t feature_dim, double beta,
                                   size_t ranks, agepost_head** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    slot = new agepost_head{
        agepost::OrdinalHead(agepost::AgeGrid(min_age, max_age), feature_dim, beta, ranks)};
  });
}

agepost_status agepost_head_load(const char* path, agepost_head** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    const auto text = agepost::read_file(deref(path, "path"));
    const auto j = agepost::Json::parse(text, nullptr, false);
    if (j.is_discarded()) agepost::fail(agepost::ErrorCode::DataError, "checkpoint is not valid JSON");
    slot = new agepost_head{agepost::checkpoint_from_json(j)};
  });
}

agepost_status agepost_head_save(const agepost_head* head, const char* path) {
  return try_([&] {
    agepost::write_file(deref(path, "path"), agepost::checkpoint_to_json(deref(head, "head").value).dump());
  });
}

size_t agepost_head_ranks(const agepost_head* head) { return head ? head->value.ranks() : 0; }

size_t agepost_head_feature_dim(const agepost_head* head) {
  return head ? head->value.feature_dim() : 0;
}

agepost_status agepost_head_forward(const agepost_head* head, const double* x, size_t dim,
                                    double* responses, size_t ranks) {
  return try_([&] {
    const auto& h = deref(head, "head").value;
    deref(x, "x");
    deref(responses, "responses");
    const auto f = agepost::forward_ordinal(h, std::span<const double>(x, dim));
    agepost::require(ranks >= f.size(), "response buffer too small");
    std::copy(f.begin(), f.end(), responses);
  });
}

agepost_status agepost_head_posterior(const agepost_head* head, const double* x, size_t dim,
                                      agepost_dist** out) {
  return try_([&] {
    auto& slot = deref(out, "out");
    const auto& h = deref(head, "head").value;
    deref(x, "x");
    slot = new agepost_dist{agepost::forward_posterior(h, std::span<const double>(x, dim))};
  });
}

agepost_status agepost_head_predict(const agepost_head* head, const double* x, size_t dim,
                                    int use_ohrank, int* age) {
  return try_([&] {
    const auto& h = deref(head, "head").value;
    deref(x, "x");
    const std::span<const double> features(x, dim);
    deref(age, "age") = use_ohrank ? agepost::predict_ohrank(h, features)
                                   : agepost::predict_posterior_mode(h, features);
  });
}

void agepost_head_free(agepost_head* head) { delete head; }

void agepost_grid_options_init(agepost_grid_options* opts) {
  if (opts) *opts = {0, 70, agepost::kDefaultBeta};
}

void agepost_policy_options_init(agepost_policy_options* opts) {
  if (opts) *opts = {3, 3, 1, 0, 0};
}

agepost_status agepost_fit_beta_csv(const char* csv_path, double* beta) {
  return try_([&] {
    auto& slot = deref(beta, "beta");
    slot = agepost::fit_beta(agepost::app::read_beta_csv(deref(csv_path, "csv_path"))).beta();
  });
}

void agepost_catalog_options_init(agepost_catalog_options* opts) {
  if (!opts) return;
  *opts = {};
  agepost_grid_options_init(&opts->grid);
  opts->num_queries = 1000;
  opts->refs_per_age = 4;
  opts->hint_noise = 3.0;
}

agepost_status agepost_run_synth_catalog(const agepost_catalog_options* opts) {
  return try_([&] {
    const auto& o = deref(opts, "opts");
    agepost::app::CatalogOptions c;
    c.grid = to_grid(o.grid);
    c.num_queries = o.num_queries;
    c.refs_per_age = o.refs_per_age;
    c.hint_noise = o.hint_noise;
    c.seed = o.seed;
    const auto cat = agepost::app::synth_catalog(c);
    std::string q;
    for (const auto& item : cat.queries) q += agepost::query_to_json(item).dump() + '\n';
    std::string r;
    for (const auto& item : cat.references) r += agepost::reference_to_json(item).dump() + '\n';
    agepost::write_file(deref(o.queries_out, "queries_out"), q);
    agepost::write_file(deref(o.refs_out, "refs_out"), r);
  });
}

void agepost_label_options_init(agepost_label_options* opts) {
  if (!opts) return;
  *opts = {};
  agepost_grid_options_init(&opts->grid);
  agepost_policy_options_init(&opts->policy);
  opts->annotator_beta = agepost::kDefaultBeta;
}

agepost_status agepost_run_label(const agepost_label_options* opts, agepost_label_summary* summary) {
  return try_([&] {
    const auto& o = deref(opts, "opts");
    auto& out = deref(summary, "summary");
    out = {};
    const auto queries = agepost::load_queries(deref(o.queries_path, "queries_path"));

    if (auto url = opt_path(o.service_url)) {
      const auto assist = agepost::app::label_via_service(queries, *url);
      out.tasks_created = assist.created;
      out.tasks_failed = assist.failed;
      if (auto path = opt_path(o.out_path)) {
        std::string text;
        for (const auto& r : assist.responses) text += r.dump() + '\n';
        agepost::write_file(*path, text);
      }
      return;
    }

    std::vector<agepost::ReferenceItem> refs;
    try {
      refs = agepost::load_references(deref(o.refs_path, "refs_path"));
    } catch (const agepost::Error& e) {
      if (e.code() != agepost::ErrorCode::IoError) throw;
      agepost::fail(agepost::ErrorCode::InsufficientPool,
                    std::string("reference pool unavailable: ") + e.what());
    }
    if (refs.empty() && !queries.empty()) {
      agepost::fail(agepost::ErrorCode::InsufficientPool, "reference pool is empty");
    }
    agepost::app::LabelOptions lo;
    lo.grid = to_grid(o.grid);
    lo.beta = o.grid.beta;
    lo.policy = to_policy(o.policy);
    lo.allow_fallback = o.allow_fallback != 0;
    lo.annotator_beta = o.annotator_beta;
    lo.annotator_mode =
        o.annotator_truthful ? agepost::AnnotatorMode::Truthful : agepost::AnnotatorMode::Stochastic;
    lo.seed = o.seed;
    const auto result = agepost::app::label_simulated(queries, refs, lo);
    out.labelled = result.labelled;
    out.discarded = result.discarded;
    if (auto path = opt_path(o.out_path)) {
      std::string text;
      for (const auto& r : result.records) text += agepost::record_to_json(r).dump() + '\n';
      agepost::write_file(*path, text);
    }
  });
}

void agepost_simulate_options_init(agepost_simulate_options* opts) {
  if (!opts) return;
  *opts = {};
  agepost_grid_options_init(&opts->grid);
  opts->annotator_beta = agepost::kDefaultBeta;
  opts->annotator_truthful = 1;
  opts->max_age_gap = 10;
  opts->trials = 10000;
}

agepost_status agepost_run_simulate(const agepost_simulate_options* opts, char** csv) {
  return try_([&] {
    const auto& o = deref(opts, "opts");
    auto& slot = deref(csv, "csv");
    agepost::NarrowingConfig c;
    c.grid = to_grid(o.grid);
    c.model_beta = o.grid.beta;
    c.annotator_beta = o.annotator_beta;
    c.annotator_mode =
        o.annotator_truthful ? agepost::AnnotatorMode::Truthful : agepost::AnnotatorMode::Stochastic;
    c.max_age_gap = o.max_age_gap;
    c.trials = o.trials;
    c.seed = o.seed;
    slot = copy_string(agepost::narrowing_csv(agepost::ci_narrowing_experiment(c)));
  });
}

void agepost_train_options_init(agepost_train_options* opts) {
  if (!opts) return;
  *opts = {};
  agepost_grid_options_init(&opts->grid);
  opts->data.n = 5000;
  opts->data.dim = 16;
  opts->loss = "both";
  opts->learning_rate = 0.1;
  opts->epochs = 200;
  opts->batch_size = 32;
}

agepost_status agepost_run_train(const agepost_train_options* opts, char** summary) {
  return try_([&] {
    const auto& o = deref(opts, "opts");
    auto& slot = deref(summary, "summary");
    const auto grid = to_grid(o.grid);
    const auto data = agepost::app::resolve_dataset(to_source(o.data), grid);
    agepost::TrainConfig config;
    config.learning_rate = o.learning_rate;
    config.epochs = o.epochs;
    config.batch_size = o.batch_size;
    config.mode = agepost::app::parse_loss_mode(o.loss ? o.loss : "both");
    config.seed = o.seed;
    agepost::OrdinalHead head(grid, data.front().features.size(), o.grid.beta);
    const auto result = agepost::train(std::move(head), data, config);
    if (auto path = opt_path(o.checkpoint_out)) {
      agepost::write_file(*path, agepost::checkpoint_to_json(result.head).dump());
    }
    if (auto path = opt_path(o.trace_out)) {
      agepost::write_file(*path, agepost::loss_trace_csv(result.trace));
    }
    const auto& last = result.trace.back();
    const agepost::Json j{{"samples", data.size()},
                          {"epochs", config.epochs},
                          {"loss", agepost::app::to_string(config.mode)},
                          {"loss_hyper", last.loss_hyper},
                          {"loss_kl", last.loss_kl},
                          {"loss_total", last.loss_total}};
    slot = copy_string(j.dump());
  });
}

void agepost_eval_options_init(agepost_eval_options* opts) {
  if (!opts) return;
  *opts = {};
  opts->data.n = 1000;
  opts->data.seed = 1;
  opts->data.dim = 16;
  opts->loss = "both";
}

agepost_status agepost_run_eval(const agepost_eval_options* opts, char** report) {
  return try_([&] {
    const auto& o = deref(opts, "opts");
    auto& slot = deref(report, "report");
    agepost::MetricReport r;
    if (auto ann = opt_path(o.annotations_path)) {
      std::vector<agepost::AnnotationRecord> records;
      for (const auto& j : agepost::read_jsonl(*ann)) records.push_back(agepost::record_from_json(j));
      const auto queries = agepost::load_queries(deref(o.queries_path, "queries_path"));
      r = agepost::app::evaluate_annotations(records, queries);
    } else {
      const auto text = agepost::read_file(deref(o.checkpoint, "checkpoint"));
      const auto j = agepost::Json::parse(text, nullptr, false);
      if (j.is_discarded()) agepost::fail(agepost::ErrorCode::DataError, "checkpoint is not valid JSON");
      const auto head = agepost::checkpoint_from_json(j);
      auto source = to_source(o.data);
      source.dim = head.feature_dim();
      const auto test = agepost::app::resolve_dataset(source, head.grid());
      r = agepost::app::evaluate_head(head, test, agepost::app::parse_loss_mode(o.loss ? o.loss : "both"));
    }
    slot = copy_string(agepost::metric_report_to_json(r).dump());
  });
}

agepost_status agepost_run_synth_data(const agepost_grid_options* grid,
                                      const agepost_dataset_options* data, const char* out_path) {
  return try_([&] {
    const auto g = to_grid(deref(grid, "grid"));
    const auto& d = deref(data, "data");
    const auto samples = agepost::synth_dataset(d.n, d.seed, g, d.dim);
    std::string text;
    for (const auto& s : samples) text += agepost::app::sample_to_json(s).dump() + '\n';
    agepost::write_file(deref(out_path, "out_path"), text);
  });
}

void agepost_service_options_init(agepost_service_options* opts) {
  if (!opts) return;
  *opts = {};
  agepost_grid_options_init(&opts->grid);
  agepost_policy_options_init(&opts->policy);
  opts->snapshot_every = 1000;
  opts->fsync = 1;
}

agepost_status agepost_service_open(const agepost_service_options* opts, agepost_service** out) {
  return try_([&] {
    const auto& o = deref(opts, "opts");
    auto& slot = deref(out, "out");
    agepost::ServiceConfig config;
    config.grid = to_grid(o.grid);
    config.beta = o.grid.beta;
    config.policy = to_policy(o.policy);
    config.data_dir = deref(o.data_dir, "data_dir");
    config.snapshot_every = o.snapshot_every;
    config.fsync = o.fsync != 0;
    std::vector<agepost::ReferenceItem> pool;
    if (auto refs = opt_path(o.refs_path)) pool = agepost::load_references(*refs);
    auto svc = std::make_unique<agepost_service>();
    svc->service = std::make_unique<agepost::AnnotationService>(std::move(config), std::move(pool));
    slot = svc.release();
  });
}

agepost_status agepost_service_call(agepost_service* svc, const char* method, const char* path,
                                    const char* body, int* http_status, char** response) {
  return try_([&] {
    auto& s = deref(svc, "svc");
    agepost::ApiRequest req;
    req.method = deref(method, "method");
    std::string target = deref(path, "path");
    const auto qmark = target.find('?');
    if (qmark != std::string::npos) {
      std::string params = target.substr(qmark + 1);
      target.resize(qmark);
      std::size_t start = 0;
      while (start <= params.size()) {
        const auto amp = params.find('&', start);
        const std::string kv = params.substr(start, amp == std::string::npos ? std::string::npos : amp - start);
        const auto eq = kv.find('=');
        if (!kv.empty()) req.params[kv.substr(0, eq)] = eq == std::string::npos ? "" : kv.substr(eq + 1);
        if (amp == std::string::npos) break;
        start = amp + 1;
      }
    }
    req.path = target;
    req.body = body ? body : "";
    const auto res = agepost::handle_request(*s.service, req);
    deref(http_status, "http_status") = res.status;
    deref(response, "response") = copy_string(res.body);
  });
}

agepost_status agepost_service_bind(agepost_service* svc, const char* host, int port, int* bound_port) {
  return try_([&] {
    auto& s = deref(svc, "svc");
    if (!s.http) s.http = std::make_unique<agepost::HttpServer>(*s.service);
    const int bound = s.http->bind(deref(host, "host"), port);
    if (bound < 0) {
      agepost::fail(agepost::ErrorCode::IoError,
                    "cannot bind " + std::string(host) + ":" + std::to_string(port));
    }
    if (bound_port) *bound_port = bound;
  });
}

agepost_status agepost_service_serve(agepost_service* svc) {
  return try_([&] {
    auto& s = deref(svc, "svc");
    if (!s.http) agepost::fail(agepost::ErrorCode::InvalidArgument, "service is not bound");
    if (!s.http->serve()) agepost::fail(agepost::ErrorCode::IoError, "listener stopped with an error");
  });
}

void agepost_service_stop(agepost_service* svc) {
  if (svc && svc->http) svc->http->stop();
}

void agepost_service_free(agepost_service* svc) {
  if (!svc) return;
  agepost_service_stop(svc);
  delete svc;
}

}  // extern "C"
