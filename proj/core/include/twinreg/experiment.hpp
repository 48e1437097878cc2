#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinreg/data.hpp"
#include "twinreg/learner.hpp"

namespace twinreg {

enum class MethodKind { ann, ann_ensemble, tnnr, tnnr_ensemble, nntnnr, knn, rf, twin_rf, semisup_rf };
enum class NnTrainMode { all_pairs, nearest };
enum class SweepAxis { none, ensemble_size, multiplier, neighbors, lambda, anchors };

std::string to_string(MethodKind k);
MethodKind method_kind_from_string(const std::string& s);
std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

struct MethodSpec {
  MethodKind kind = MethodKind::tnnr;
  Index ensemble_size = 1;              // ann_ensemble, tnnr_ensemble
  std::optional<Index> multiplier;      // tnnr training pairs; unset = all n^2 pairs
  Index neighbors = 16;                 // nntnnr m
  NnTrainMode train_mode = NnTrainMode::nearest;
  Index k = 5;                          // knn
  double loop_weight = 1.0;             // semisup_rf
  std::optional<Index> anchors;         // tnnr: random inference anchors per repetition
  bool symmetric = true;                // twin inference symmetrization
  bool augment = false;                 // difference features for MLP twins (forests always augment)

  std::string label() const;
};

struct ExperimentConfig {
  std::string dataset = "TF";  // synthetic key (TF, RCL, WSB) or CSV path
  std::string target_column;   // CSV only; empty selects the last column
  Index dataset_size = 0;      // synthetic rows; 0 = default size
  std::uint64_t data_seed = 0;

  MethodSpec method;
  std::variant<SplitFractions, SplitCounts> split = SplitFractions{};
  Index repetitions = 25;
  std::uint64_t seed = 0;

  MlpConfig ann_mlp = [] {
    MlpConfig c;
    c.max_epochs = 2000;
    return c;
  }();
  MlpConfig twin_mlp = [] {
    MlpConfig c;
    c.max_epochs = 10000;
    return c;
  }();
  ForestGrid grid;

  bool transductive = true;
  std::optional<Index> loop_count;

  SweepAxis axis = SweepAxis::none;
  std::vector<double> sweep_values;

  std::filesystem::path output_dir;
  bool record_timing = true;
  Index jobs = 1;

  void validate() const;
  /// The split used by repetition r (shared by every sweep value).
  SplitSpec split_for(Index repetition) const;
};

nlohmann::json to_json(const MethodSpec& m);
MethodSpec method_from_json(const nlohmann::json& j, MethodSpec base = {});
nlohmann::json to_json(const ExperimentConfig& c);
/// Fields absent from `j` keep the values of `base`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json to_json(const MlpConfig& c);
MlpConfig mlp_config_from_json(const nlohmann::json& j, MlpConfig base = {});
nlohmann::json to_json(const ForestGrid& g);
ForestGrid forest_grid_from_json(const nlohmann::json& j, ForestGrid base = {});

/// Failure inside one repetition, tagged with its index.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(Index repetition, const std::string& what)
      : std::runtime_error("repetition " + std::to_string(repetition) + ": " + what),
        repetition_(repetition) {}
  Index repetition() const noexcept { return repetition_; }

 private:
  Index repetition_;
};

struct RepetitionResult {
  Index repetition = 0;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double train_seconds = 0.0;
  double infer_seconds = 0.0;
  std::size_t parameter_count = 0;
};

struct ExperimentResult {
  MethodSpec method;
  std::optional<double> sweep_value;
  std::vector<RepetitionResult> repetitions;
  double mean_rmse = 0.0;
  double standard_error = 0.0;

  std::vector<double> rmses() const;
  /// Recomputes mean_rmse and standard_error from the stored repetitions.
  void summarize();
  nlohmann::json to_json() const;
};

Dataset load_dataset(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data);

/// Applies one sweep value to a method.
MethodSpec apply_sweep_value(const MethodSpec& m, SweepAxis axis, double value);

/// One result per sweep value. Repetition r uses the same split for every value;
/// models whose training does not depend on the swept value are trained once per repetition.
std::vector<ExperimentResult> sweep(const ExperimentConfig& cfg);
std::vector<ExperimentResult> sweep(const ExperimentConfig& cfg, const Dataset& data);

/// Several methods on the same repetitions (cfg.method and the sweep are ignored).
/// Models shared between methods, such as the supervised twin forest, are trained once.
std::vector<ExperimentResult> compare_methods(const ExperimentConfig& cfg, const Dataset& data,
                                              const std::vector<MethodSpec>& methods);

/// result.json (config echo + every result) and result.csv
/// (seed, sweep_value, rmse, train_s, infer_s; one row per repetition x sweep value).
void write_results(const ExperimentConfig& cfg, const std::vector<ExperimentResult>& results,
                   const std::filesystem::path& dir);
std::string results_csv(const std::vector<ExperimentResult>& results, bool with_timing);

struct MultiplierCheck {
  std::vector<Index> multipliers{1, 4, 16};
  std::vector<double> rmse;  // mean over repetitions, per multiplier
  std::string verdict;       // "ok" or "reject-tnnr"
};

/// TNNR at multipliers 1, 4, 16 over the configured repetitions. Strictly increasing
/// RMSE with the multiplier yields "reject-tnnr".
MultiplierCheck multiplier_check(const ExperimentConfig& cfg);
MultiplierCheck multiplier_check(const ExperimentConfig& cfg, const Dataset& data);
std::string multiplier_verdict(const std::vector<double>& rmse_by_multiplier);

}  // namespace twinreg
