#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "twinreg/cross_validation.hpp"
#include "twinreg/data.hpp"
#include "twinreg/learner.hpp"
#include "twinreg/pairing.hpp"

namespace twinreg {

/// A base regressor F over pair features plus the labelled anchors it is
/// evaluated against. F(a, b) estimates y_a - y_b.
struct TwinModel {
  ModelPtr base;
  Dataset anchors;  // features and targets in the space the base model was trained in
  bool augment = false;
  // Present when the anchors are standardized; maps raw queries into model space.
  std::optional<Scaler> input_scaler;

  Index feature_count() const { return anchors.feature_count(); }
  Index anchor_count() const { return anchors.rows(); }
  /// Base-model parameters plus f + 1 stored numbers per anchor.
  std::size_t storage_count() const;
};

/// Wraps an already trained pair model (or a reference model such as F == 0).
TwinModel make_twin_model(ModelPtr base, Dataset anchors, bool augment);

struct AnchorPolicy {
  enum class Mode { all, fixed_subset, nearest };

  Mode mode = Mode::all;
  std::vector<Index> indices;  // fixed_subset
  Index m = 0;                 // nearest
  // Averages 1/2 F(q,a) - 1/2 F(a,q) when set, F(q,a) alone otherwise.
  bool symmetric = true;

  static AnchorPolicy all(bool symmetric = true) { return {Mode::all, {}, 0, symmetric}; }
  static AnchorPolicy fixed(std::vector<Index> idx, bool symmetric = true) {
    return {Mode::fixed_subset, std::move(idx), 0, symmetric};
  }
  static AnchorPolicy nearest(Index m, bool symmetric = true) {
    return {Mode::nearest, {}, m, symmetric};
  }

  void validate(Index anchor_count) const;
};

struct TwinPrediction {
  double value = 0.0;
  Vector per_anchor_values;
  double uncertainty = 0.0;  // population std of per_anchor_values
  std::vector<Index> anchors;
};

/// Trains `learner` on build_pairs(train, strategy). For MLPs a validation set is
/// paired against the training rows in both directions for early stopping (against its
/// m nearest training rows under nearest-neighbour pairing).
TwinModel twin_fit(const LearnerConfig& learner, const Dataset& train, const PairingStrategy& strategy,
                   const std::optional<Dataset>& validation, std::uint64_t seed);

/// F evaluated row-wise on (left_i, right_i).
Vector pair_predict(const TwinModel& tm, const Matrix& left, const Matrix& right);

TwinPrediction twin_predict(const TwinModel& tm, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                            const AnchorPolicy& policy);

/// Per-query predictions for every row of `queries`, batched through the base model.
std::vector<TwinPrediction> twin_predict_batch(const TwinModel& tm, const Matrix& queries,
                                               const AnchorPolicy& policy);

/// Values only; same numbers as twin_predict_batch(...)[i].value.
Vector twin_predict_values(const TwinModel& tm, const Matrix& queries, const AnchorPolicy& policy);

/// Single-input predictor x -> F(x, x_j) + y_j for a fixed anchor j.
class AnchoredPredictor {
 public:
  AnchoredPredictor(ModelPtr base, Eigen::RowVectorXd anchor_features, double anchor_target, bool augment);

  Vector predict(const Matrix& x) const;
  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  const Eigen::RowVectorXd& anchor_features() const { return anchor_x_; }
  double anchor_target() const { return anchor_y_; }

 private:
  ModelPtr base_;
  Eigen::RowVectorXd anchor_x_;
  double anchor_y_;
  bool augment_;
};

AnchoredPredictor materialize_anchored_predictor(const TwinModel& tm, Index anchor_index);

/// F(x1,x2) + F(x2,x3) + F(x3,x1); zero for a loop-consistent model.
double loop_violation(const TwinModel& tm, const Eigen::Ref<const Eigen::RowVectorXd>& x1,
                      const Eigen::Ref<const Eigen::RowVectorXd>& x2,
                      const Eigen::Ref<const Eigen::RowVectorXd>& x3);

// ---------------------------------------------------------------------------

struct TwinGridSearchResult {
  CvSelection selection;
  TwinModel model;
};

/// Twinned random-forest tuning. Folds split the original rows; each fold trains on
/// the pairs of its training rows and is scored by all-anchor twin prediction of the
/// held-out rows. The winner is refit on the pairs of every row.
TwinGridSearchResult twin_grid_search_cv(const LearnerConfig& forest_config, const Dataset& train,
                                         const PairingStrategy& strategy, std::uint64_t seed);

// ---------------------------------------------------------------------------

/// One JSON file: the base model envelope plus an anchor table with f + 1 numbers per row.
void save_twin(const TwinModel& tm, const std::filesystem::path& path);
TwinModel load_twin(const std::filesystem::path& path);

}  // namespace twinreg
