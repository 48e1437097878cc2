#include "twinreg/learner.hpp"

#include <stdexcept>

#include "twinreg/forest.hpp"
#include "twinreg/knn.hpp"
#include "twinreg/mlp.hpp"

namespace twinreg {

std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::mlp: return "mlp";
    case LearnerKind::random_forest: return "random_forest";
    case LearnerKind::knn: return "knn";
    case LearnerKind::constant: return "constant";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& s) {
  if (s == "mlp") return LearnerKind::mlp;
  if (s == "random_forest" || s == "rf") return LearnerKind::random_forest;
  if (s == "knn") return LearnerKind::knn;
  if (s == "constant") return LearnerKind::constant;
  throw std::invalid_argument("unknown learner kind: " + s);
}

void MlpConfig::validate() const {
  for (Index h : hidden)
    if (h < 1) throw std::invalid_argument("mlp config: hidden widths must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("mlp config: batch size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("mlp config: max_epochs must be >= 1");
  if (max_steps < 0) throw std::invalid_argument("mlp config: max_steps must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("mlp config: learning rate must be > 0");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("mlp config: rho must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("mlp config: epsilon must be > 0");
  if (plateau_patience < 1 || early_stop_patience < 1) {
    throw std::invalid_argument("mlp config: patience values must be >= 1");
  }
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) {
    throw std::invalid_argument("mlp config: lr_factor must lie in (0, 1]");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("mlp config: validation_fraction must lie in (0, 1)");
  }
}

void ForestParams::validate() const {
  if (n_estimators < 1) throw std::invalid_argument("forest: n_estimators must be >= 1");
  if (max_depth < 1) throw std::invalid_argument("forest: max_depth must be >= 1");
  if (!(max_features > 0.0 && max_features <= 1.0)) {
    throw std::invalid_argument("forest: max_features must lie in (0, 1]");
  }
  if (min_samples_leaf < 1) throw std::invalid_argument("forest: min_samples_leaf must be >= 1");
  if (min_samples_split < 2) throw std::invalid_argument("forest: min_samples_split must be >= 2");
}

std::size_t ForestGrid::cardinality() const {
  return max_depth.size() * max_features.size() * min_samples_leaf.size() *
         min_samples_split.size() * n_estimators.size();
}

std::vector<ForestParams> ForestGrid::candidates() const {
  std::vector<ForestParams> out;
  out.reserve(cardinality());
  for (Index depth : max_depth)
    for (double feat : max_features)
      for (Index leaf : min_samples_leaf)
        for (Index split : min_samples_split)
          for (Index trees : n_estimators) {
            ForestParams p;
            p.max_depth = depth;
            p.max_features = feat;
            p.min_samples_leaf = leaf;
            p.min_samples_split = split;
            p.n_estimators = trees;
            out.push_back(p);
          }
  return out;
}

void ForestGrid::validate() const {
  if (cv_folds < 2) throw std::invalid_argument("grid: cv_folds must be >= 2");
  if (cardinality() == 0) throw std::invalid_argument("grid: every axis needs at least one value");
  for (const auto& p : candidates()) p.validate();
}

void LearnerConfig::validate() const {
  switch (kind) {
    case LearnerKind::mlp: mlp.validate(); break;
    case LearnerKind::random_forest:
      forest.validate();
      grid.validate();
      break;
    case LearnerKind::knn:
      if (knn.k < 1) throw std::invalid_argument("knn: k must be >= 1");
      break;
    case LearnerKind::constant: break;
  }
}

Vector Model::predict(const Matrix& x) const {
  if (x.cols() != input_width()) {
    throw std::invalid_argument("predict: feature width " + std::to_string(x.cols()) +
                                " does not match model width " + std::to_string(input_width()));
  }
  return predict_unchecked(x);
}

Vector ConstantModel::predict_unchecked(const Matrix& x) const {
  return Vector::Constant(x.rows(), value_);
}

ModelPtr fit(const LearnerConfig& config, const Matrix& features, const Vector& targets,
             const std::optional<ValidationData>& validation, std::uint64_t seed) {
  config.validate();
  if (features.rows() < 1) throw std::invalid_argument("fit: empty training input");
  if (features.rows() != targets.size()) throw std::invalid_argument("fit: row/target mismatch");
  if (!features.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("fit: non-finite training input");
  }
  switch (config.kind) {
    case LearnerKind::mlp: return train_mlp(config.mlp, features, targets, validation, seed);
    case LearnerKind::random_forest: return train_forest(config.forest, features, targets, seed);
    case LearnerKind::knn: return std::make_shared<const KnnModel>(features, targets, config.knn.k);
    case LearnerKind::constant:
      return std::make_shared<const ConstantModel>(features.cols(), targets.mean());
  }
  throw std::invalid_argument("fit: unknown learner kind");
}

std::size_t count_parameters(MlpRole role, Index f, const std::vector<Index>& hidden, bool augment) {
  if (f < 1) throw std::invalid_argument("count_parameters: f must be >= 1");
  std::size_t in = static_cast<std::size_t>(role == MlpRole::plain ? f : (augment ? 3 * f : 2 * f));
  std::size_t total = 0;
  for (Index h : hidden) {
    const auto out = static_cast<std::size_t>(h);
    total += in * out + out;
    in = out;
  }
  return total + in + 1;
}

}  // namespace twinreg
