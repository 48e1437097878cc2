#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "twinreg/twin.hpp"

namespace twinreg {

/// One loop (i, j, k): i is a labelled row, j != k are unlabelled rows.
struct LoopSample {
  Index labeled = 0;
  Index unlabeled_a = 0;
  Index unlabeled_b = 0;
};

struct SemiSupConfig {
  double loop_weight = 1.0;         // Lambda
  std::optional<Index> loop_count;  // default: labelled size / 3, at least 1
  bool transductive = true;

  Index resolved_loop_count(Index labeled_rows) const;
  void validate() const;
};

/// Loop-adjusted pair labels: a = d_ij + d_jk + d_ki, each label d - lambda * a.
std::array<double, 3> propose_loop_labels(const std::array<double, 3>& predicted, double loop_weight);

/// Evaluates the twin model around the loop and proposes the three labels.
std::array<double, 3> propose_loop_labels(const TwinModel& model,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& xi,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& xj,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& xk,
                                          double loop_weight);

/// Uniform loops, independent across loops, j != k within a loop.
std::vector<LoopSample> sample_loops(Index labeled_rows, Index unlabeled_rows, Index count,
                                     std::uint64_t seed);

struct SemiSupResult {
  TwinModel model;
  ForestParams forest_params;  // hyperparameters carried from the supervised step
  std::vector<LoopSample> loops;
  PairedDataset augmented_pairs;  // labelled pairs followed by 3 rows per loop
  Index labeled_pair_count = 0;
  TwinModel supervised;  // the step-1 model
};

/// Single retraining pass with loop-consistency pseudo-labels.
/// Random forests are tuned by twinned CV in the supervised step and the winning
/// hyperparameters are reused for the refit; other learners use their config as given.
SemiSupResult semisup_fit(const LearnerConfig& learner, const Dataset& labeled,
                          const Matrix& unlabeled, const SemiSupConfig& cfg, std::uint64_t seed);

/// Same, starting from an already trained supervised twin model (its pairs must have
/// been built with full augmented pairing of `labeled`).
SemiSupResult semisup_refit(const LearnerConfig& learner, const TwinModel& supervised,
                            const Dataset& labeled, const Matrix& unlabeled,
                            const SemiSupConfig& cfg, std::uint64_t seed);

}  // namespace twinreg
