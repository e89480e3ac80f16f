// osp: command-line front end for selective classification with one-sided
// prediction.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "osp/config.hpp"
#include "osp/data.hpp"
#include "osp/eval.hpp"
#include "osp/oracle.hpp"
#include "osp/pipeline.hpp"

namespace {

using namespace osp;
using pipeline::format_number;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitInfeasible = 3;

// Flags shared by the training-related subcommands. Each one overrides the
// config file only when given on the command line.
struct ConfigFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string data_path;
  std::string synth_kind;
  std::size_t synth_n = 0;
  std::uint64_t synth_seed = 0;
  std::vector<std::size_t> layer_widths;
  std::string activation;
  std::size_t epochs = 0;
  std::size_t warm_start_epochs = 0;
  std::size_t batch_size = 0;
  double lr_min = 0.0;
  double lr_max = 0.0;
  bool adaptive = false;
  std::string mode;
  double target = 0.0;
  std::vector<double> mu_grid;
  std::vector<double> curve_targets;
  std::string output_dir;
  std::size_t workers = 1;

  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    opts["config"] = app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    opts["seed"] = app->add_option("--seed", seed, "training seed");
    opts["split-seed"] = app->add_option("--split-seed", split_seed, "split seed");
    opts["data"] = app->add_option("--data", data_path, "dataset CSV (f0,...,label)");
    opts["synth-kind"] = app->add_option("--synth-kind", synth_kind, "analytic | gaussian_mixture | blobs");
    opts["synth-n"] = app->add_option("--synth-n", synth_n, "synthetic sample count");
    opts["synth-seed"] = app->add_option("--synth-seed", synth_seed, "synthetic data seed");
    opts["layers"] = app->add_option("--layers", layer_widths, "hidden widths after the input");
    opts["activation"] = app->add_option("--activation", activation, "relu | tanh | identity");
    opts["epochs"] = app->add_option("--epochs", epochs, "SGDA epochs");
    opts["warm-epochs"] = app->add_option("--warm-epochs", warm_start_epochs, "warm start epochs");
    opts["batch"] = app->add_option("--batch", batch_size, "batch size");
    opts["lr-min"] = app->add_option("--lr-min", lr_min, "descent rate");
    opts["lr-max"] = app->add_option("--lr-max", lr_max, "ascent rate");
    opts["adaptive"] = app->add_flag("--adaptive", adaptive, "adaptive step sizes");
    opts["mode"] = app->add_option("--mode", mode, "error | coverage")->check(CLI::IsMember({"error", "coverage"}));
    opts["target"] = app->add_option("--target", target, "error bound or coverage floor");
    opts["mu-grid"] = app->add_option("--mu-grid", mu_grid, "mu values");
    opts["curve-targets"] = app->add_option("--curve-targets", curve_targets, "target errors for curve.csv");
    opts["out"] = app->add_option("--out", output_dir, "output directory");
    opts["workers"] = app->add_option("--workers", workers, "parallel mu-grid trainings");
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

  config::RunConfig resolve() const {
    config::RunConfig cfg = config_path.empty() ? config::RunConfig{} : config::load_config(config_path);
    if (given("seed")) cfg.seed = seed;
    if (given("split-seed")) cfg.split_seed = split_seed;
    if (given("data")) cfg.dataset_path = data_path;
    if (given("synth-kind")) cfg.synthetic.kind = data::parse_synthetic_kind(synth_kind);
    if (given("synth-n")) cfg.synthetic.n = synth_n;
    if (given("synth-seed")) cfg.synthetic.seed = synth_seed;
    if (given("layers")) cfg.layer_widths = layer_widths;
    if (given("activation")) cfg.activation = net::parse_activation(activation);
    if (given("epochs")) cfg.train.epochs = epochs;
    if (given("warm-epochs")) cfg.train.warm_start_epochs = warm_start_epochs;
    if (given("batch")) cfg.train.batch_size = batch_size;
    if (given("lr-min")) cfg.train.lr_min = lr_min;
    if (given("lr-max")) cfg.train.lr_max = lr_max;
    if (given("adaptive")) cfg.train.adaptive = adaptive;
    if (given("mode"))
      cfg.criterion.mode = mode == "error" ? select::SelectionCriterion::Mode::ErrorConstrained
                                           : select::SelectionCriterion::Mode::CoverageConstrained;
    if (given("target")) cfg.criterion.target = target;
    if (given("mu-grid")) cfg.mu_grid = mu_grid;
    if (given("curve-targets")) cfg.curve_targets = curve_targets;
    if (given("out")) cfg.output_dir = output_dir;
    if (given("workers")) cfg.workers = workers;
    return cfg;
  }
};

std::vector<select::TrainedModel> load_models(const std::vector<std::string>& paths,
                                              const std::vector<double>& mus) {
  if (paths.size() != mus.size()) throw InputError("--model and --mu must have equal counts");
  std::vector<select::TrainedModel> models;
  for (std::size_t i = 0; i < paths.size(); ++i) models.push_back({mus[i], net::load_model(paths[i])});
  return models;
}

void print_metrics(const Metrics& m) {
  std::cout << "coverage," << format_number(m.coverage) << "\nerror," << format_number(m.raw_error)
            << "\nrejection_rate," << format_number(m.rejection_rate) << '\n';
  for (std::size_t k = 0; k < m.per_class_one_sided_error.size(); ++k)
    std::cout << "one_sided_error_" << k << ',' << format_number(m.per_class_one_sided_error[k]) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective classification with one-sided prediction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset as CSV");
  ConfigFlags synth_flags;
  std::string synth_csv;
  synth_flags.attach(synth);
  synth->add_option("--csv", synth_csv, "output CSV path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "warm start then SGDA at one mu");
  ConfigFlags train_flags;
  double train_mu = 1.0;
  std::string train_model, train_log;
  train_flags.attach(train_cmd);
  train_cmd->add_option("--mu", train_mu, "mu value")->required();
  train_cmd->add_option("--model-out", train_model, "model output path")->required();
  train_cmd->add_option("--log-out", train_log, "training log CSV path");

  // select
  auto* select_cmd = app.add_subcommand("select", "choose (mu, t) on validation data");
  std::vector<std::string> sel_models;
  std::vector<double> sel_mus, sel_ts;
  std::string sel_val, sel_mode = "error", sel_grid_out;
  double sel_target = 0.02;
  select_cmd->add_option("--model", sel_models, "model files")->required();
  select_cmd->add_option("--mu", sel_mus, "mu of each model file")->required();
  select_cmd->add_option("--val", sel_val, "validation CSV")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--mode", sel_mode)->check(CLI::IsMember({"error", "coverage"}));
  select_cmd->add_option("--target", sel_target);
  select_cmd->add_option("--t-grid", sel_ts, "thresholds (default 100 in [0,1])");
  select_cmd->add_option("--grid-out", sel_grid_out, "selection grid CSV path");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "metrics of a hardened or baseline rule");
  std::string ev_model, ev_data, ev_method = "osp";
  double ev_t = 0.5;
  eval_cmd->add_option("--model", ev_model)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev_data)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--t", ev_t, "threshold");
  eval_cmd->add_option("--method", ev_method)->check(CLI::IsMember({"osp", "sr", "dg"}));

  // curve
  auto* curve_cmd = app.add_subcommand("curve", "coverage-error curve over target errors");
  std::vector<std::string> cv_models;
  std::vector<double> cv_mus, cv_targets, cv_ts;
  std::string cv_val, cv_test, cv_out;
  curve_cmd->add_option("--model", cv_models)->required();
  curve_cmd->add_option("--mu", cv_mus)->required();
  curve_cmd->add_option("--val", cv_val)->required()->check(CLI::ExistingFile);
  curve_cmd->add_option("--test", cv_test)->required()->check(CLI::ExistingFile);
  curve_cmd->add_option("--targets", cv_targets, "target errors (default 0.005..0.1)");
  curve_cmd->add_option("--t-grid", cv_ts);
  curve_cmd->add_option("--csv", cv_out, "output CSV path");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "exact oracles on a dataset or the analytic example");
  std::string or_data, or_class = "thresholds", or_solver = "exact";
  double or_eps = 0.04;
  std::size_t or_feature = 0;
  bool or_analytic = false;
  oracle_cmd->add_option("--data", or_data)->check(CLI::ExistingFile);
  oracle_cmd->add_option("--eps", or_eps)->required();
  oracle_cmd->add_option("--feature", or_feature);
  oracle_cmd->add_option("--class", or_class)->check(CLI::IsMember({"thresholds", "intervals"}));
  oracle_cmd->add_option("--solver", or_solver)->check(CLI::IsMember({"exact", "decoupled"}));
  oracle_cmd->add_flag("--analytic", or_analytic, "closed-form coverage of the analytic example");

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "full run into an output directory");
  ConfigFlags pipe_flags;
  pipe_flags.attach(pipe_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*synth) {
      const auto cfg = synth_flags.resolve();
      data::write_csv(data::synthesize(cfg.synthetic), synth_csv);
      return kExitOk;
    }
    if (*train_cmd) {
      auto cfg = train_flags.resolve();
      cfg.train.mu = train_mu;
      cfg.train.seed = cfg.seed;
      cfg.validate();
      const auto data = pipeline::load_dataset(cfg);
      const auto result = train::sgda_train(data, cfg.backbone(data.dim()), cfg.train);
      net::save_model(result.model, train_model);
      if (!train_log.empty()) {
        std::ofstream out(train_log);
        out << pipeline::training_log_csv(result.log, config::config_hash(cfg), cfg.seed);
      }
      return kExitOk;
    }
    if (*select_cmd) {
      const auto models = load_models(sel_models, sel_mus);
      const auto val = data::ingest_csv(sel_val);
      const auto ts = sel_ts.empty() ? select::default_thresholds() : sel_ts;
      select::SelectionCriterion crit{sel_mode == "error"
                                          ? select::SelectionCriterion::Mode::ErrorConstrained
                                          : select::SelectionCriterion::Mode::CoverageConstrained,
                                      sel_target};
      crit.validate();
      const auto grid = select::fill_grid(models, ts, val);
      const auto result = select::choose(grid, crit);
      if (!sel_grid_out.empty()) {
        std::ofstream out(sel_grid_out);
        out << pipeline::grid_csv(grid, "none", 0);
      }
      std::cout << "mu,t,coverage,error,feasible\n"
                << format_number(result.cell.mu) << ',' << format_number(result.cell.t) << ','
                << format_number(result.cell.coverage) << ',' << format_number(result.cell.error)
                << ',' << (result.feasible ? 1 : 0) << '\n';
      return result.feasible ? kExitOk : kExitInfeasible;
    }
    if (*eval_cmd) {
      const auto model = net::load_model(ev_model);
      const auto data = data::ingest_csv(ev_data);
      const auto family = ev_method == "osp"  ? select::harden(model, ev_t)
                          : ev_method == "sr" ? eval::sr_baseline(model, ev_t)
                                              : eval::dg_decisions(model, ev_t);
      print_metrics(evaluate(family, data));
      if (ev_method == "osp") std::cout << "overlap," << format_number(eval::osp_overlap(model, ev_t, data)) << '\n';
      return kExitOk;
    }
    if (*curve_cmd) {
      const auto models = load_models(cv_models, cv_mus);
      const auto curve = eval::coverage_error_curve(
          models, cv_ts.empty() ? select::default_thresholds() : cv_ts, data::ingest_csv(cv_val),
          data::ingest_csv(cv_test), cv_targets.empty() ? eval::default_curve_targets() : cv_targets,
          "osp");
      const auto text = pipeline::curve_csv(curve, "none", 0);
      if (cv_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(cv_out);
        out << text;
      }
      return kExitOk;
    }
    if (*oracle_cmd) {
      if (or_analytic) {
        const auto a = oracle::analytic_example_coverage(or_eps);
        std::cout << "coverage," << format_number(a.coverage) << '\n';
        return kExitOk;
      }
      if (or_data.empty()) throw InputError("oracle needs --data or --analytic");
      const auto data = data::ingest_csv(or_data);
      if (or_feature >= data.dim()) throw InputError("--feature out of range");
      const auto cuts = oracle::FiniteHypothesisClass::data_cuts(data, or_feature);
      const auto cls = or_class == "thresholds" ? oracle::FiniteHypothesisClass::thresholds(or_feature, cuts)
                                                : oracle::FiniteHypothesisClass::intervals(or_feature, cuts);
      const auto sol = or_solver == "exact"
                           ? oracle::solve_sc_exact(data, cls, or_eps)
                           : oracle::solve_osp_decoupled(
                                 data, cls, or_eps,
                                 oracle::count_lattice_alpha_grid(data.size(), data.num_classes(), or_eps));
      std::cout << "coverage," << format_number(sol.value) << "\nerror," << format_number(sol.error)
                << "\nfeasible," << (sol.feasible ? 1 : 0) << '\n';
      return sol.feasible ? kExitOk : kExitInfeasible;
    }
    if (*pipe_cmd) {
      const auto result = pipeline::run_pipeline(pipe_flags.resolve());
      std::cout << pipeline::metrics_csv(result.metrics, result.config_hash, pipe_flags.resolve().seed);
      return result.metrics.feasible ? kExitOk : kExitInfeasible;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}
