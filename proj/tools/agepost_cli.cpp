// agepost command-line front end. Links only the C API.

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "agepost/agepost.h"

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kData = 3, kRuntime = 4 };

int exit_code_for(agepost_status s) {
  switch (s) {
    case AGEPOST_OK:
      return kOk;
    case AGEPOST_ERR_INVALID_ARGUMENT:
    case AGEPOST_ERR_DIMENSION_MISMATCH:
    case AGEPOST_ERR_LENGTH_MISMATCH:
      return kValidation;
    case AGEPOST_ERR_DATA:
    case AGEPOST_ERR_IO:
    case AGEPOST_ERR_INSUFFICIENT_POOL:
    case AGEPOST_ERR_EMPTY_SUPPORT:
      return kData;
    default:
      return kRuntime;
  }
}

struct Output {
  bool json = false;

  int fail(agepost_status s) const {
    const std::string detail = agepost_last_error();
    if (json) {
      std::cout << nlohmann::json{{"error", agepost_status_name(s)}, {"detail", detail}}.dump()
                << '\n';
    } else {
      std::cerr << "error: " << agepost_status_name(s) << ": " << detail << '\n';
    }
    return exit_code_for(s);
  }
};

// Owns a malloc'd string returned by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { agepost_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

const char* c_str_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void add_grid_flags(CLI::App* cmd, agepost_grid_options& g) {
  cmd->add_option("--min-age", g.min_age, "Youngest age on the grid")->envname("AGEPOST_MIN_AGE");
  cmd->add_option("--max-age", g.max_age, "Oldest age on the grid")->envname("AGEPOST_MAX_AGE");
  cmd->add_option("--beta", g.beta, "Logistic steepness of the comparison model")
      ->envname("AGEPOST_BETA");
}

void add_policy_flags(CLI::App* cmd, agepost_policy_options& p, bool& any_gender) {
  cmd->add_option("--below", p.num_below, "References younger than the rough age")
      ->envname("AGEPOST_BELOW");
  cmd->add_option("--above", p.num_above, "References older than the rough age")
      ->envname("AGEPOST_ABOVE");
  cmd->add_option("--max-gap", p.max_age_gap, "Max years between reference and rough age (0 = any)")
      ->envname("AGEPOST_MAX_GAP");
  cmd->add_flag("--any-gender", any_gender, "Do not require gender-matched references");
}

int run_serve(agepost_service_options& opts, const std::string& host, int port, const Output& out) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  agepost_service* svc = nullptr;
  if (auto s = agepost_service_open(&opts, &svc); s != AGEPOST_OK) return out.fail(s);
  int bound = 0;
  if (auto s = agepost_service_bind(svc, host.c_str(), port, &bound); s != AGEPOST_OK) {
    agepost_service_free(svc);
    return out.fail(s);
  }
  if (out.json) {
    std::cout << nlohmann::json{{"listening", host}, {"port", bound}}.dump() << std::endl;
  } else {
    std::cout << "listening on " << host << ":" << bound << std::endl;
  }

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    agepost_service_stop(svc);
  });
  const auto status = agepost_service_serve(svc);
  pthread_kill(waiter.native_handle(), SIGUSR1);
  waiter.join();
  agepost_service_free(svc);
  return status == AGEPOST_OK ? kOk : out.fail(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise-comparison age posterior workbench"};
  app.require_subcommand(1);
  app.fallthrough();
  Output out;
  app.add_flag("--json", out.json, "Machine-readable JSON output");
  std::uint64_t seed = 0;

  // fit-beta
  auto* fit = app.add_subcommand("fit-beta", "Fit the logistic steepness to comparison accuracy data");
  std::string fit_csv;
  fit->add_option("csv", fit_csv, "CSV of age_diff,frac_older")->required();

  // synth-catalog
  auto* catalog = app.add_subcommand("synth-catalog", "Write a synthetic query catalog and reference pool");
  agepost_catalog_options cat_opts;
  agepost_catalog_options_init(&cat_opts);
  std::string cat_queries, cat_refs;
  add_grid_flags(catalog, cat_opts.grid);
  catalog->add_option("--queries-out", cat_queries)->required();
  catalog->add_option("--refs-out", cat_refs)->required();
  catalog->add_option("--n-queries", cat_opts.num_queries);
  catalog->add_option("--refs-per-age", cat_opts.refs_per_age);
  catalog->add_option("--hint-noise", cat_opts.hint_noise, "Stddev of the rough-age hint");
  catalog->add_option("--seed", seed);

  // label
  auto* label = app.add_subcommand("label", "Label queries by pairwise comparisons");
  agepost_label_options label_opts;
  agepost_label_options_init(&label_opts);
  label_opts.policy.max_age_gap = 10;
  std::string label_queries, label_refs, label_out, label_url, annotator = "stochastic";
  bool label_any_gender = false;
  bool label_strict = false;
  double simulate_beta = -1.0;
  add_grid_flags(label, label_opts.grid);
  add_policy_flags(label, label_opts.policy, label_any_gender);
  label->add_option("--queries", label_queries, "Query catalog (JSON lines)")->required();
  label->add_option("--refs", label_refs, "Reference pool (JSON lines)");
  label->add_option("--out", label_out, "Annotation records (JSON lines)");
  auto* sim_opt = label->add_option("--simulate", simulate_beta, "Simulated annotator steepness");
  auto* assist_opt =
      label->add_option("--serve-assist", label_url, "Post tasks to a running service at this URL");
  sim_opt->excludes(assist_opt);
  label->add_option("--annotator", annotator, "stochastic | truthful")
      ->check(CLI::IsMember({"stochastic", "truthful"}));
  label->add_flag("--strict", label_strict, "Fail instead of relaxing gender, then widening strata");
  label->add_option("--seed", seed);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "CI narrowing experiment");
  agepost_simulate_options sim_opts;
  agepost_simulate_options_init(&sim_opts);
  std::string sim_out, sim_annotator = "truthful";
  double sim_annotator_beta = -1.0;
  add_grid_flags(simulate, sim_opts.grid);
  simulate->add_option("--trials", sim_opts.trials);
  simulate->add_option("--max-gap", sim_opts.max_age_gap, "Bracketing window in years");
  simulate->add_option("--annotator", sim_annotator)->check(CLI::IsMember({"stochastic", "truthful"}));
  simulate->add_option("--annotator-beta", sim_annotator_beta);
  simulate->add_option("--out", sim_out, "CSV path (stdout when omitted)");
  simulate->add_option("--seed", seed);

  // train
  auto* train = app.add_subcommand("train", "Train an ordinal head");
  agepost_train_options train_opts;
  agepost_train_options_init(&train_opts);
  std::string train_loss = "both", train_ckpt, train_trace, train_dataset;
  add_grid_flags(train, train_opts.grid);
  train->add_option("--dataset", train_dataset, "JSON-lines dataset (synthetic when omitted)");
  train->add_option("--n-train", train_opts.data.n);
  train->add_option("--data-seed", train_opts.data.seed);
  train->add_option("--dim", train_opts.data.dim);
  train->add_option("--loss", train_loss)->check(CLI::IsMember({"both", "hyper", "kl"}));
  train->add_option("--lr", train_opts.learning_rate);
  train->add_option("--epochs", train_opts.epochs);
  train->add_option("--batch", train_opts.batch_size);
  train->add_option("--out", train_ckpt, "Checkpoint path")->required();
  train->add_option("--trace", train_trace, "Loss trace CSV");
  train->add_option("--seed", seed);

  // eval
  auto* eval = app.add_subcommand("eval", "Score a checkpoint or an annotation run");
  agepost_eval_options eval_opts;
  agepost_eval_options_init(&eval_opts);
  std::string eval_ckpt, eval_dataset, eval_loss = "both", eval_ann, eval_queries;
  eval->add_option("--checkpoint", eval_ckpt);
  eval->add_option("--dataset", eval_dataset);
  eval->add_option("--n-test", eval_opts.data.n);
  eval->add_option("--data-seed", eval_opts.data.seed);
  eval->add_option("--loss", eval_loss, "Inference path: hyper counts thresholds, else posterior mode")
      ->check(CLI::IsMember({"both", "hyper", "kl"}));
  eval->add_option("--annotations", eval_ann);
  eval->add_option("--queries", eval_queries, "Catalog with true_age for --annotations");
  eval->add_option("--seed", seed);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic feature dataset");
  agepost_grid_options synth_grid;
  agepost_grid_options_init(&synth_grid);
  agepost_dataset_options synth_data{nullptr, 1000, 0, 16};
  std::string synth_out;
  add_grid_flags(synth, synth_grid);
  synth->add_option("--n", synth_data.n);
  synth->add_option("--dim", synth_data.dim);
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--seed", seed);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  agepost_service_options serve_opts;
  agepost_service_options_init(&serve_opts);
  serve_opts.policy.max_age_gap = 10;
  std::string serve_refs, serve_dir = "agepost-data", serve_host = "127.0.0.1";
  int serve_port = 8080;
  bool serve_any_gender = false, serve_no_fsync = false;
  add_grid_flags(serve, serve_opts.grid);
  add_policy_flags(serve, serve_opts.policy, serve_any_gender);
  serve->add_option("--refs", serve_refs, "Reference pool (JSON lines)")
      ->required()
      ->envname("AGEPOST_REFS");
  serve->add_option("--data-dir", serve_dir, "Event log and snapshot directory")
      ->envname("AGEPOST_DATA_DIR");
  serve->add_option("--host", serve_host)->envname("AGEPOST_HOST");
  serve->add_option("--port", serve_port)->envname("AGEPOST_PORT");
  serve->add_option("--snapshot-every", serve_opts.snapshot_every);
  serve->add_flag("--no-fsync", serve_no_fsync);
  serve->add_option("--seed", seed)->envname("AGEPOST_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  if (fit->parsed()) {
    double beta = 0.0;
    if (auto s = agepost_fit_beta_csv(fit_csv.c_str(), &beta); s != AGEPOST_OK) return out.fail(s);
    if (out.json) std::cout << nlohmann::json{{"beta", beta}}.dump() << '\n';
    else std::printf("%.6f\n", beta);
    return kOk;
  }

  if (catalog->parsed()) {
    cat_opts.seed = seed;
    cat_opts.queries_out = cat_queries.c_str();
    cat_opts.refs_out = cat_refs.c_str();
    if (auto s = agepost_run_synth_catalog(&cat_opts); s != AGEPOST_OK) return out.fail(s);
    if (out.json) {
      std::cout << nlohmann::json{{"queries", cat_queries}, {"references", cat_refs}}.dump() << '\n';
    }
    return kOk;
  }

  if (label->parsed()) {
    label_opts.seed = seed;
    label_opts.policy.seed = seed;
    label_opts.policy.gender_match_required = label_any_gender ? 0 : 1;
    label_opts.allow_fallback = label_strict ? 0 : 1;
    label_opts.queries_path = label_queries.c_str();
    label_opts.refs_path = c_str_or_null(label_refs);
    label_opts.out_path = c_str_or_null(label_out);
    label_opts.service_url = c_str_or_null(label_url);
    label_opts.annotator_truthful = annotator == "truthful";
    if (simulate_beta > 0.0) label_opts.annotator_beta = simulate_beta;
    if (label_url.empty() && label_refs.empty()) {
      label_opts.refs_path = "";
    }
    agepost_label_summary summary{};
    if (auto s = agepost_run_label(&label_opts, &summary); s != AGEPOST_OK) return out.fail(s);
    if (!label_url.empty()) {
      if (out.json) {
        std::cout << nlohmann::json{{"tasks_created", summary.tasks_created},
                                    {"tasks_failed", summary.tasks_failed}}
                         .dump()
                  << '\n';
      } else {
        std::printf("tasks created: %zu\ntasks failed: %zu\n", summary.tasks_created,
                    summary.tasks_failed);
      }
      return summary.tasks_failed == 0 ? kOk : kData;
    }
    const std::size_t total = summary.labelled + summary.discarded;
    const double rate = total == 0 ? 0.0 : static_cast<double>(summary.discarded) / total;
    if (out.json) {
      std::cout << nlohmann::json{{"labelled", summary.labelled},
                                  {"discarded", summary.discarded},
                                  {"discard_rate", rate}}
                       .dump()
                << '\n';
    } else {
      std::printf("labelled: %zu\ndiscarded: %zu\ndiscard rate: %.4f\n", summary.labelled,
                  summary.discarded, rate);
    }
    return kOk;
  }

  if (simulate->parsed()) {
    sim_opts.seed = seed;
    sim_opts.annotator_truthful = sim_annotator == "truthful";
    sim_opts.annotator_beta = sim_annotator_beta > 0.0 ? sim_annotator_beta : sim_opts.grid.beta;
    LibString csv;
    if (auto s = agepost_run_simulate(&sim_opts, &csv.p); s != AGEPOST_OK) return out.fail(s);
    if (!sim_out.empty()) {
      std::FILE* f = std::fopen(sim_out.c_str(), "w");
      if (!f || std::fputs(csv.p, f) < 0) {
        if (f) std::fclose(f);
        std::cerr << "error: IoError: cannot write " << sim_out << '\n';
        return kData;
      }
      std::fclose(f);
      if (out.json) std::cout << nlohmann::json{{"csv", sim_out}}.dump() << '\n';
    } else if (out.json) {
      std::cout << nlohmann::json{{"csv", csv.str()}}.dump() << '\n';
    } else {
      std::cout << csv.str();
    }
    return kOk;
  }

  if (train->parsed()) {
    train_opts.seed = seed;
    train_opts.loss = train_loss.c_str();
    train_opts.data.path = c_str_or_null(train_dataset);
    train_opts.checkpoint_out = train_ckpt.c_str();
    train_opts.trace_out = c_str_or_null(train_trace);
    LibString summary;
    if (auto s = agepost_run_train(&train_opts, &summary.p); s != AGEPOST_OK) return out.fail(s);
    if (out.json) {
      std::cout << summary.str() << '\n';
    } else {
      const auto j = nlohmann::json::parse(summary.str());
      std::printf("trained %s head on %zu samples for %d epochs\nfinal loss: %.6f (hyper %.6f, kl %.6f)\n",
                  j["loss"].get<std::string>().c_str(), j["samples"].get<std::size_t>(),
                  j["epochs"].get<int>(), j["loss_total"].get<double>(),
                  j["loss_hyper"].get<double>(), j["loss_kl"].get<double>());
    }
    return kOk;
  }

  if (eval->parsed()) {
    if (eval_ckpt.empty() == eval_ann.empty()) {
      std::cerr << "error: give exactly one of --checkpoint or --annotations\n";
      return kValidation;
    }
    eval_opts.checkpoint = c_str_or_null(eval_ckpt);
    eval_opts.data.path = c_str_or_null(eval_dataset);
    eval_opts.loss = eval_loss.c_str();
    eval_opts.annotations_path = c_str_or_null(eval_ann);
    eval_opts.queries_path = c_str_or_null(eval_queries);
    LibString report;
    if (auto s = agepost_run_eval(&eval_opts, &report.p); s != AGEPOST_OK) return out.fail(s);
    // The report is JSON either way; plain mode pretty-prints it.
    if (out.json) std::cout << report.str() << '\n';
    else std::cout << nlohmann::json::parse(report.str()).dump(2) << '\n';
    return kOk;
  }

  if (synth->parsed()) {
    synth_data.seed = seed;
    if (auto s = agepost_run_synth_data(&synth_grid, &synth_data, synth_out.c_str()); s != AGEPOST_OK) {
      return out.fail(s);
    }
    if (out.json) std::cout << nlohmann::json{{"dataset", synth_out}, {"n", synth_data.n}}.dump() << '\n';
    return kOk;
  }

  if (serve->parsed()) {
    serve_opts.policy.seed = seed;
    serve_opts.policy.gender_match_required = serve_any_gender ? 0 : 1;
    serve_opts.refs_path = serve_refs.c_str();
    serve_opts.data_dir = serve_dir.c_str();
    serve_opts.fsync = serve_no_fsync ? 0 : 1;
    return run_serve(serve_opts, serve_host, serve_port, out);
  }
  return kValidation;
}
