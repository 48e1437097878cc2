// twinreg command line: synthetic data, experiments, sweeps and diagnostics.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "twinreg/bias_variance.hpp"
#include "twinreg/errors.hpp"
#include "twinreg/experiment.hpp"
#include "twinreg/model_io.hpp"
#include "twinreg/storage.hpp"

using namespace twinreg;
using nlohmann::json;

namespace {

/// Flags shared by run, sweep and multiplier-check. Every field is optional so
/// that only flags given on the command line override the config file.
struct ExperimentFlags {
  std::string config_path;
  std::optional<std::string> dataset, target, method, train_mode, axis, out, optimizer, split;
  std::optional<Index> size, ensemble, multiplier, neighbors, k, anchors, repetitions, jobs, loops;
  std::optional<Index> train_n, test_n, twin_epochs, ann_epochs, max_steps, patience;
  std::optional<std::uint64_t> seed, data_seed;
  std::optional<double> lambda, learning_rate;
  std::vector<double> values;
  std::vector<Index> rf_estimators, rf_depths;
  std::optional<Index> cv_folds;
  bool augment = false, asymmetric = false, no_timing = false, inductive = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("-c,--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--dataset", f.dataset, "TF, RCL, WSB or a CSV path");
  cmd->add_option("--target", f.target, "CSV target column name (default: last column)");
  cmd->add_option("--size", f.size, "synthetic dataset rows (0 = default)");
  cmd->add_option("--data-seed", f.data_seed, "synthetic data seed");
  cmd->add_option("--method", f.method,
                  "ann, ann_ensemble, tnnr, tnnr_ensemble, nntnnr, knn, rf, twin_rf, semisup_rf");
  cmd->add_option("-E,--ensemble", f.ensemble, "ensemble size");
  cmd->add_option("--multiplier", f.multiplier, "TNNR training pairs per row (0 = all)");
  cmd->add_option("-m,--neighbors", f.neighbors, "NNTNNR neighbour count");
  cmd->add_option("--train-mode", f.train_mode, "NNTNNR training pairs: nearest or all")
      ->check(CLI::IsMember({"nearest", "all"}));
  cmd->add_option("-k", f.k, "k-NN neighbour count");
  cmd->add_option("--lambda", f.lambda, "semi-supervised loop weight");
  cmd->add_option("--anchors", f.anchors, "random inference anchors for TNNR");
  cmd->add_flag("--augment", f.augment, "append x_i - x_j to MLP pair features");
  cmd->add_flag("--asymmetric", f.asymmetric, "use F(q, a) only at inference");
  cmd->add_option("--split", f.split, "train,validation,test fractions, e.g. 0.7,0.1,0.2");
  cmd->add_option("--train-n", f.train_n, "absolute training rows (count split)");
  cmd->add_option("--test-n", f.test_n, "absolute test rows (count split)");
  cmd->add_option("-r,--repetitions", f.repetitions, "number of random splits");
  cmd->add_option("-s,--seed", f.seed, "experiment seed");
  cmd->add_option("--twin-epochs", f.twin_epochs, "max epochs for twin MLPs");
  cmd->add_option("--ann-epochs", f.ann_epochs, "max epochs for plain MLPs");
  cmd->add_option("--max-steps", f.max_steps, "cap on minibatch updates for every MLP (0 = none)");
  cmd->add_option("--patience", f.patience, "early-stopping patience for every MLP");
  cmd->add_option("--optimizer", f.optimizer, "adadelta or adam")->check(CLI::IsMember({"adadelta", "adam"}));
  cmd->add_option("--learning-rate", f.learning_rate, "optimizer learning rate for every MLP");
  cmd->add_option("--rf-estimators", f.rf_estimators, "forest grid: n_estimators values")->delimiter(',');
  cmd->add_option("--rf-depths", f.rf_depths, "forest grid: max_depth values")->delimiter(',');
  cmd->add_option("--cv-folds", f.cv_folds, "forest grid: cross-validation folds");
  cmd->add_flag("--inductive", f.inductive, "semisup: draw unlabelled rows from outside the test set");
  cmd->add_option("--loops", f.loops, "semisup loop count (default: labelled rows / 3)");
  cmd->add_option("-o,--out", f.out, "output directory");
  cmd->add_flag("--no-timing", f.no_timing, "write zero timings (bit-reproducible CSV)");
  cmd->add_option("-j,--jobs", f.jobs, "repetitions run in parallel");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  return json::parse(in);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

ExperimentConfig resolve_config(const ExperimentFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = experiment_config_from_json(read_json_file(f.config_path));
  if (f.dataset) cfg.dataset = *f.dataset;
  if (f.target) cfg.target_column = *f.target;
  if (f.size) cfg.dataset_size = *f.size;
  if (f.data_seed) cfg.data_seed = *f.data_seed;
  if (f.method) cfg.method.kind = method_kind_from_string(*f.method);
  if (f.ensemble) cfg.method.ensemble_size = *f.ensemble;
  if (f.multiplier) cfg.method.multiplier = *f.multiplier;
  if (f.neighbors) cfg.method.neighbors = *f.neighbors;
  if (f.train_mode) cfg.method.train_mode = *f.train_mode == "nearest" ? NnTrainMode::nearest : NnTrainMode::all_pairs;
  if (f.k) cfg.method.k = *f.k;
  if (f.lambda) cfg.method.loop_weight = *f.lambda;
  if (f.anchors) cfg.method.anchors = *f.anchors;
  if (f.augment) cfg.method.augment = true;
  if (f.asymmetric) cfg.method.symmetric = false;
  if (f.split) {
    const auto v = parse_list(*f.split);
    if (v.size() != 3) throw std::invalid_argument("--split expects three fractions");
    cfg.split = SplitFractions{v[0], v[1], v[2]};
  }
  if (f.train_n || f.test_n) {
    SplitCounts c;
    if (const auto* prev = std::get_if<SplitCounts>(&cfg.split)) c = *prev;
    if (f.train_n) c.train = *f.train_n;
    if (f.test_n) c.test = *f.test_n;
    cfg.split = c;
  }
  if (f.repetitions) cfg.repetitions = *f.repetitions;
  if (f.seed) cfg.seed = *f.seed;
  if (f.twin_epochs) cfg.twin_mlp.max_epochs = *f.twin_epochs;
  if (f.ann_epochs) cfg.ann_mlp.max_epochs = *f.ann_epochs;
  for (MlpConfig* m : {&cfg.ann_mlp, &cfg.twin_mlp}) {
    if (f.max_steps) m->max_steps = *f.max_steps;
    if (f.patience) {
      m->early_stop_patience = *f.patience;
      m->plateau_patience = std::max<Index>(1, *f.patience / 2);
    }
    if (f.optimizer) m->optimizer = *f.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::adadelta;
    if (f.learning_rate) m->learning_rate = *f.learning_rate;
  }
  if (!f.rf_estimators.empty()) cfg.grid.n_estimators = f.rf_estimators;
  if (!f.rf_depths.empty()) cfg.grid.max_depth = f.rf_depths;
  if (f.cv_folds) cfg.grid.cv_folds = *f.cv_folds;
  if (f.inductive) cfg.transductive = false;
  if (f.loops) cfg.loop_count = *f.loops;
  if (f.axis) cfg.axis = sweep_axis_from_string(*f.axis);
  if (!f.values.empty()) cfg.sweep_values = f.values;
  if (f.out) cfg.output_dir = *f.out;
  if (f.no_timing) cfg.record_timing = false;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (cfg.output_dir.empty()) cfg.output_dir = "results";
  return cfg;
}

json summary(const std::vector<ExperimentResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    arr.push_back({{"label", r.method.label()},
                   {"sweep_value", r.sweep_value ? json(*r.sweep_value) : json(nullptr)},
                   {"mean_rmse", r.mean_rmse},
                   {"standard_error", r.standard_error}});
  }
  return arr;
}

void write_json(const std::filesystem::path& dir, const std::string& name, const json& j) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / name, j.dump(2) + "\n");
}

int emit_error(const std::string& type, const std::string& message, const json& extra = json::object()) {
  json err = {{"type", type}, {"message", message}};
  err.update(extra);
  std::cerr << json{{"error", err}}.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinreg: twinned regression benchmarks"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
  std::string gen_key = "TF";
  Index gen_n = 0;
  std::uint64_t gen_seed = 0;
  std::optional<double> gen_noise;
  std::string gen_out;
  gen->add_option("--dataset", gen_key, "TF, RCL or WSB")->check(CLI::IsMember({"TF", "RCL", "WSB"}));
  gen->add_option("-n,--size", gen_n, "rows (0 = default size)");
  gen->add_option("-s,--seed", gen_seed, "seed");
  gen->add_option("--noise", gen_noise, "Gaussian noise std (default per dataset)");
  gen->add_option("-o,--out", gen_out, "CSV path")->required();

  ExperimentFlags run_flags, sweep_flags, mc_flags;
  auto* run = app.add_subcommand("run", "single experiment over repeated splits");
  add_experiment_flags(run, run_flags);
  auto* sw = app.add_subcommand("sweep", "experiment over a list of values of one axis");
  add_experiment_flags(sw, sweep_flags);
  sw->add_option("--axis", sweep_flags.axis, "ensemble_size, multiplier, neighbors, lambda, anchors");
  sw->add_option("--values", sweep_flags.values, "sweep values")->delimiter(',');
  auto* mc = app.add_subcommand("multiplier-check", "TNNR at multipliers 1, 4, 16");
  add_experiment_flags(mc, mc_flags);

  auto* st = app.add_subcommand("storage-report", "stored parameters of ANN vs TNNR ensembles");
  Index st_f = 13;
  std::vector<Index> st_sizes{1, 2, 4, 8, 16, 32};
  std::vector<Index> st_hidden{128, 128};
  bool st_augment = false;
  std::string st_out;
  st->add_option("-f,--features", st_f, "input feature count")->check(CLI::PositiveNumber);
  st->add_option("-E,--ensemble", st_sizes, "ensemble sizes")->delimiter(',');
  st->add_option("--hidden", st_hidden, "hidden layer widths")->delimiter(',');
  st->add_flag("--augment", st_augment, "twin inputs include x_i - x_j");
  st->add_option("-o,--out", st_out, "output directory");

  auto* bv = app.add_subcommand("bv-diag", "Monte-Carlo bias/variance/covariance check");
  BvConfig bv_cfg;
  std::string bv_members = "shared";
  Index bv_degree = 3, bv_n = 30;
  double bv_noise = 0.3;
  bool bv_no_bootstrap = false;
  std::string bv_out;
  bv->add_option("-t,--trials", bv_cfg.trials, "Monte-Carlo trials (>= 30)");
  bv->add_option("-s,--seed", bv_cfg.seed, "seed");
  bv->add_option("--members", bv_members, "shared or independent training sets")
      ->check(CLI::IsMember({"shared", "independent"}));
  bv->add_option("--degree", bv_degree, "polynomial degree of both members");
  bv->add_option("--n-train", bv_n, "training rows per draw");
  bv->add_option("--noise", bv_noise, "label noise std");
  bv->add_flag("--no-bootstrap", bv_no_bootstrap, "members fit D directly (identical members)");
  bv->add_option("-o,--out", bv_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      const Dataset d = gen_noise ? generate_synthetic(gen_key, gen_n, gen_seed, *gen_noise)
                                  : generate_synthetic(gen_key, gen_n, gen_seed);
      save_csv(d, gen_out);
      std::cout << json{{"dataset", gen_key}, {"rows", d.rows()}, {"path", gen_out}}.dump() << "\n";
    } else if (*run || *sw) {
      ExperimentConfig cfg = resolve_config(*run ? run_flags : sweep_flags);
      if (*run) {
        cfg.axis = SweepAxis::none;
        cfg.sweep_values.clear();
      } else if (cfg.axis == SweepAxis::none) {
        throw std::invalid_argument("sweep: --axis is required");
      }
      const auto results = sweep(cfg);
      write_results(cfg, results, cfg.output_dir);
      std::cout << json{{"output_dir", cfg.output_dir.string()}, {"results", summary(results)}}.dump() << "\n";
    } else if (*mc) {
      ExperimentConfig cfg = resolve_config(mc_flags);
      const auto check = multiplier_check(cfg);
      const json j = {{"multipliers", check.multipliers}, {"rmse", check.rmse}, {"verdict", check.verdict}};
      json full = j;
      full["config"] = to_json(cfg);
      write_json(cfg.output_dir, "result.json", full);
      std::cout << j.dump() << "\n";
    } else if (*st) {
      const auto rep = storage_report(st_f, st_sizes, st_hidden, st_augment);
      if (!st_out.empty()) {
        write_json(st_out, "storage.json", rep.to_json());
        std::ostringstream csv;
        csv << "ensemble_size,ann,tnnr\n";
        for (const auto& r : rep.rows) csv << r.ensemble_size << ',' << r.ann << ',' << r.tnnr << '\n';
        write_file_atomic(std::filesystem::path(st_out) / "storage.csv", csv.str());
      }
      std::cout << rep.to_json().dump() << "\n";
    } else if (*bv) {
      bv_cfg.member_data = bv_members == "shared" ? BvMemberData::shared : BvMemberData::independent;
      const auto task = polynomial_task(bv_n, bv_noise);
      const auto est = polynomial_estimator(bv_degree, !bv_no_bootstrap);
      const auto rec = bias_variance_diagnostic(task, est, est, bv_cfg);
      if (!bv_out.empty()) write_json(bv_out, "bv.json", rec.to_json());
      std::cout << rec.to_json().dump() << "\n";
      if (!rec.consistent && !rec.degenerate) return emit_error("identity", "bias-variance identity outside tolerance");
    }
  } catch (const CsvError& e) {
    return emit_error("csv", e.what(), {{"kind", CsvError::kind_name(e.kind())}, {"row", e.row()}, {"column", e.column()}});
  } catch (const ExperimentError& e) {
    return emit_error("experiment", e.what(), {{"repetition", e.repetition()}});
  } catch (const std::invalid_argument& e) {
    return emit_error("invalid_argument", e.what());
  } catch (const json::exception& e) {
    return emit_error("config", e.what());
  } catch (const std::exception& e) {
    return emit_error("runtime", e.what());
  }
  return 0;
}
