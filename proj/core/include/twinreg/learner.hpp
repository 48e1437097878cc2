#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "twinreg/data.hpp"

namespace twinreg {

enum class LearnerKind { mlp, random_forest, knn, constant };
enum class Activation { relu, tanh };
enum class OptimizerKind { adadelta, adam };

std::string to_string(LearnerKind k);
LearnerKind learner_kind_from_string(const std::string& s);

struct MlpConfig {
  std::vector<Index> hidden{128, 128};
  Activation activation = Activation::relu;
  Index batch_size = 16;
  Index max_epochs = 2000;
  Index max_steps = 0;  // cap on minibatch updates across epochs; 0 = none

  OptimizerKind optimizer = OptimizerKind::adadelta;
  double learning_rate = 1.0;  // Adadelta multiplier; use ~1e-3 for Adam
  double rho = 0.95;
  double epsilon = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.999;

  Index plateau_patience = 25;
  double lr_factor = 0.5;
  double min_learning_rate = 1e-5;
  Index early_stop_patience = 50;
  // Counters reset only when validation RMSE drops by more than this fraction.
  double min_relative_improvement = 1e-4;
  // Held-out share carved from the training rows when no validation set is given.
  double validation_fraction = 0.1;
  bool standardize_targets = true;

  void validate() const;
};

struct ForestParams {
  Index n_estimators = 100;
  Index max_depth = 64;
  double max_features = 1.0;  // fraction of features tried per split
  Index min_samples_leaf = 1;
  Index min_samples_split = 2;
  bool bootstrap = true;

  void validate() const;
  bool operator==(const ForestParams&) const = default;
};

/// Hyperparameter grid, iterated with max_depth outermost and n_estimators innermost.
struct ForestGrid {
  std::vector<Index> max_depth{4, 8, 16, 32, 64};
  std::vector<double> max_features{0.33, 0.667, 1.0};
  std::vector<Index> min_samples_leaf{1, 2, 5};
  std::vector<Index> min_samples_split{2, 4, 8};
  std::vector<Index> n_estimators{100, 300, 600};
  Index cv_folds = 5;

  std::size_t cardinality() const;
  std::vector<ForestParams> candidates() const;
  void validate() const;
};

struct KnnConfig {
  Index k = 5;
};

struct LearnerConfig {
  LearnerKind kind = LearnerKind::mlp;
  MlpConfig mlp;
  ForestParams forest;
  ForestGrid grid;
  KnnConfig knn;

  static LearnerConfig make_mlp(MlpConfig c = {}) {
    LearnerConfig cfg;
    cfg.kind = LearnerKind::mlp;
    cfg.mlp = std::move(c);
    return cfg;
  }
  static LearnerConfig make_forest(ForestParams p = {}, ForestGrid g = {}) {
    LearnerConfig cfg;
    cfg.kind = LearnerKind::random_forest;
    cfg.forest = p;
    cfg.grid = std::move(g);
    return cfg;
  }
  static LearnerConfig make_knn(Index k) {
    LearnerConfig cfg;
    cfg.kind = LearnerKind::knn;
    cfg.knn.k = k;
    return cfg;
  }

  void validate() const;
};

/// A fitted regressor. Immutable after construction; predict is reentrant.
class Model {
 public:
  virtual ~Model() = default;

  virtual LearnerKind kind() const = 0;
  virtual Index input_width() const = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual nlohmann::json to_json() const = 0;

  /// One prediction per row. Throws std::invalid_argument on width mismatch.
  Vector predict(const Matrix& x) const;

 protected:
  virtual Vector predict_unchecked(const Matrix& x) const = 0;
};

using ModelPtr = std::shared_ptr<const Model>;

/// Outputs the same value for every input. Used for degenerate and reference models.
class ConstantModel final : public Model {
 public:
  ConstantModel(Index width, double value) : width_(width), value_(value) {}

  LearnerKind kind() const override { return LearnerKind::constant; }
  Index input_width() const override { return width_; }
  std::size_t parameter_count() const override { return 1; }
  nlohmann::json to_json() const override;
  double value() const { return value_; }

 protected:
  Vector predict_unchecked(const Matrix& x) const override;

 private:
  Index width_;
  double value_;
};

struct ValidationData {
  Matrix features;
  Vector targets;
};

/// Fits the configured learner. For random forests the hyperparameters in
/// `config.forest` are used as given (see grid_search_cv for tuning).
ModelPtr fit(const LearnerConfig& config, const Matrix& features, const Vector& targets,
             const std::optional<ValidationData>& validation, std::uint64_t seed);

inline Vector predict(const Model& m, const Matrix& features) { return m.predict(features); }

enum class MlpRole { plain, twin };

/// Stored weights and biases of an MLP: sum over layers of (in * out + out).
/// Plain nets see f inputs, twin nets 2f (3f with difference augmentation).
std::size_t count_parameters(MlpRole role, Index f, const std::vector<Index>& hidden,
                             bool augment = false);

}  // namespace twinreg
