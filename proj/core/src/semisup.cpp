#include "twinreg/semisup.hpp"

#include <stdexcept>

#include "twinreg/forest.hpp"
#include "twinreg/random.hpp"

namespace twinreg {

Index SemiSupConfig::resolved_loop_count(Index labeled_rows) const {
  if (loop_count) return *loop_count;
  return std::max<Index>(1, labeled_rows / 3);
}

void SemiSupConfig::validate() const {
  if (!(loop_weight >= 0.0)) throw std::invalid_argument("semisup: loop weight must be >= 0");
  if (loop_count && *loop_count < 1) throw std::invalid_argument("semisup: loop count must be >= 1");
}

std::array<double, 3> propose_loop_labels(const std::array<double, 3>& predicted, double loop_weight) {
  const double a = predicted[0] + predicted[1] + predicted[2];
  return {predicted[0] - loop_weight * a, predicted[1] - loop_weight * a,
          predicted[2] - loop_weight * a};
}

std::array<double, 3> propose_loop_labels(const TwinModel& model,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& xi,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& xj,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& xk,
                                          double loop_weight) {
  Matrix left(3, xi.size());
  Matrix right(3, xi.size());
  left << xi, xj, xk;
  right << xj, xk, xi;
  const Vector d = pair_predict(model, left, right);
  return propose_loop_labels({d[0], d[1], d[2]}, loop_weight);
}

std::vector<LoopSample> sample_loops(Index labeled_rows, Index unlabeled_rows, Index count,
                                     std::uint64_t seed) {
  if (labeled_rows < 1) throw std::invalid_argument("sample_loops: no labelled rows");
  if (unlabeled_rows < 2) throw std::invalid_argument("sample_loops: need at least 2 unlabelled rows");
  auto rng = make_rng(seed, 41);
  std::uniform_int_distribution<Index> pick_l(0, labeled_rows - 1);
  std::uniform_int_distribution<Index> pick_u(0, unlabeled_rows - 1);
  std::uniform_int_distribution<Index> pick_u2(0, unlabeled_rows - 2);
  std::vector<LoopSample> loops;
  loops.reserve(static_cast<std::size_t>(count));
  for (Index t = 0; t < count; ++t) {
    LoopSample s;
    s.labeled = pick_l(rng);
    s.unlabeled_a = pick_u(rng);
    // Uniform over the remaining rows.
    s.unlabeled_b = pick_u2(rng);
    if (s.unlabeled_b >= s.unlabeled_a) ++s.unlabeled_b;
    loops.push_back(s);
  }
  return loops;
}

SemiSupResult semisup_refit(const LearnerConfig& learner, const TwinModel& supervised,
                            const Dataset& labeled, const Matrix& unlabeled,
                            const SemiSupConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (labeled.empty()) throw std::invalid_argument("semisup: labelled set is empty");
  if (unlabeled.rows() < 2) throw std::invalid_argument("semisup: need at least 2 unlabelled rows");
  if (unlabeled.cols() != labeled.feature_count()) {
    throw std::invalid_argument("semisup: unlabelled width mismatch");
  }
  if (!supervised.augment) throw std::invalid_argument("semisup: supervised model must use augmented pairs");

  SemiSupResult res;
  res.supervised = supervised;
  const Index n_loops = cfg.resolved_loop_count(labeled.rows());
  res.loops = sample_loops(labeled.rows(), unlabeled.rows(), n_loops, seed);

  // Loop edges (x_i, x_j), (x_j, x_k), (x_k, x_i), predicted in one batch.
  const Index f = labeled.feature_count();
  Matrix left(3 * n_loops, f);
  Matrix right(3 * n_loops, f);
  for (Index t = 0; t < n_loops; ++t) {
    const auto& s = res.loops[static_cast<std::size_t>(t)];
    const auto xi = labeled.features.row(s.labeled);
    const auto xj = unlabeled.row(s.unlabeled_a);
    const auto xk = unlabeled.row(s.unlabeled_b);
    left.row(3 * t) = xi;
    right.row(3 * t) = xj;
    left.row(3 * t + 1) = xj;
    right.row(3 * t + 1) = xk;
    left.row(3 * t + 2) = xk;
    right.row(3 * t + 2) = xi;
  }
  const Matrix loop_features = make_pair_features(left, right, true);
  const Vector predicted = supervised.base->predict(loop_features);
  Vector proposed(3 * n_loops);
  for (Index t = 0; t < n_loops; ++t) {
    const auto labels = propose_loop_labels({predicted[3 * t], predicted[3 * t + 1], predicted[3 * t + 2]},
                                            cfg.loop_weight);
    for (Index e = 0; e < 3; ++e) proposed[3 * t + e] = labels[static_cast<std::size_t>(e)];
  }

  const PairedDataset base_pairs = build_pairs(labeled, PairingStrategy::full(true), seed);
  res.labeled_pair_count = base_pairs.size();
  res.augmented_pairs.feature_count = f;
  res.augmented_pairs.augment = true;
  res.augmented_pairs.pair_index = base_pairs.pair_index;
  res.augmented_pairs.pair_features.resize(base_pairs.size() + 3 * n_loops, base_pairs.pair_features.cols());
  res.augmented_pairs.pair_features << base_pairs.pair_features, loop_features;
  res.augmented_pairs.pair_targets.resize(base_pairs.size() + 3 * n_loops);
  res.augmented_pairs.pair_targets << base_pairs.pair_targets, proposed;

  LearnerConfig refit_cfg = learner;
  if (const auto* forest = dynamic_cast<const ForestModel*>(supervised.base.get())) {
    res.forest_params = forest->params();
    refit_cfg.forest = forest->params();
  } else {
    res.forest_params = learner.forest;
  }
  auto base = fit(refit_cfg, res.augmented_pairs.pair_features, res.augmented_pairs.pair_targets,
                  std::nullopt, seed);
  res.model = make_twin_model(std::move(base), labeled, true);
  return res;
}

SemiSupResult semisup_fit(const LearnerConfig& learner, const Dataset& labeled, const Matrix& unlabeled,
                          const SemiSupConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (labeled.empty()) throw std::invalid_argument("semisup: labelled set is empty");
  if (unlabeled.rows() < 2) throw std::invalid_argument("semisup: need at least 2 unlabelled rows");
  const auto strategy = PairingStrategy::full(true);
  TwinModel supervised = learner.kind == LearnerKind::random_forest
                             ? twin_grid_search_cv(learner, labeled, strategy, seed).model
                             : twin_fit(learner, labeled, strategy, std::nullopt, seed);
  return semisup_refit(learner, supervised, labeled, unlabeled, cfg, seed);
}

}  // namespace twinreg
