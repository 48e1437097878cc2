#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "twinreg/learner.hpp"

namespace twinreg {

/// k folds as contiguous blocks of a seeded permutation of 0..n-1.
/// Block sizes differ by at most one.
std::vector<std::vector<Index>> make_folds(Index n, Index k, std::uint64_t seed);

struct CandidateScore {
  ForestParams params;
  std::vector<double> fold_rmse;
  double mean_rmse = 0.0;
};

/// Scores one candidate on one fold: fit on `train_rows`, return RMSE on `test_rows`.
using FoldEvaluator = std::function<double(const ForestParams& params,
                                           const std::vector<Index>& train_rows,
                                           const std::vector<Index>& test_rows,
                                           std::uint64_t fold_seed)>;

struct CvSelection {
  ForestParams best;
  double best_rmse = 0.0;
  std::vector<CandidateScore> scores;  // grid iteration order
};

/// Exhaustive grid search; the lowest mean fold RMSE wins, ties to the earlier candidate.
/// Every candidate sees the same folds and the same per-fold seed.
CvSelection select_by_cv(const ForestGrid& grid, Index n, std::uint64_t seed,
                         const FoldEvaluator& evaluate);

struct GridSearchResult {
  CvSelection selection;
  ModelPtr model;  // refit on all rows with the winner
};

/// Plain random-forest tuning over `config.grid` followed by a full refit.
GridSearchResult grid_search_cv(const LearnerConfig& config, const Matrix& features,
                                const Vector& targets, std::uint64_t seed);

}  // namespace twinreg
