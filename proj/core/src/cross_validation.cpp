#include "twinreg/cross_validation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "twinreg/forest.hpp"
#include "twinreg/metrics.hpp"
#include "twinreg/random.hpp"

namespace twinreg {

std::vector<std::vector<Index>> make_folds(Index n, Index k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("cv: need at least 2 folds");
  if (n < k) {
    throw std::invalid_argument("cv: " + std::to_string(n) + " rows cannot fill " +
                                std::to_string(k) + " folds");
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  auto rng = make_rng(seed, 31);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  Index start = 0;
  for (Index f = 0; f < k; ++f) {
    const Index len = n / k + (f < n % k ? 1 : 0);
    folds[static_cast<std::size_t>(f)].assign(perm.begin() + start, perm.begin() + start + len);
    start += len;
  }
  return folds;
}

CvSelection select_by_cv(const ForestGrid& grid, Index n, std::uint64_t seed,
                         const FoldEvaluator& evaluate) {
  grid.validate();
  const auto folds = make_folds(n, grid.cv_folds, seed);

  // Complement of each fold, computed once.
  std::vector<std::vector<Index>> train_rows(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_rows[f].insert(train_rows[f].end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_rows[f].begin(), train_rows[f].end());
  }

  CvSelection sel;
  sel.best_rmse = std::numeric_limits<double>::infinity();
  for (const auto& params : grid.candidates()) {
    CandidateScore cs;
    cs.params = params;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      cs.fold_rmse.push_back(evaluate(params, train_rows[f], folds[f], derive_seed(seed, 100 + f)));
    }
    cs.mean_rmse = mean(cs.fold_rmse);
    if (cs.mean_rmse < sel.best_rmse) {
      sel.best_rmse = cs.mean_rmse;
      sel.best = params;
    }
    sel.scores.push_back(std::move(cs));
  }
  return sel;
}

GridSearchResult grid_search_cv(const LearnerConfig& config, const Matrix& features,
                                const Vector& targets, std::uint64_t seed) {
  if (config.kind != LearnerKind::random_forest) {
    throw std::invalid_argument("grid_search_cv: only random forests are tuned by grid search");
  }
  if (features.rows() != targets.size()) throw std::invalid_argument("grid_search_cv: row/target mismatch");
  if (features.rows() < config.grid.cv_folds) {
    throw std::invalid_argument("grid_search_cv: fewer rows than folds");
  }

  auto rows_of = [&](const std::vector<Index>& idx) {
    Matrix x(static_cast<Index>(idx.size()), features.cols());
    Vector y(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      x.row(static_cast<Index>(k)) = features.row(idx[k]);
      y[static_cast<Index>(k)] = targets[idx[k]];
    }
    return std::pair{std::move(x), std::move(y)};
  };

  GridSearchResult result;
  result.selection = select_by_cv(
      config.grid, features.rows(), seed,
      [&](const ForestParams& p, const std::vector<Index>& tr, const std::vector<Index>& te,
          std::uint64_t fold_seed) {
        const auto [xtr, ytr] = rows_of(tr);
        const auto [xte, yte] = rows_of(te);
        const auto model = train_forest(p, xtr, ytr, fold_seed);
        return rmse(model->predict(xte), yte);
      });
  result.model = train_forest(result.selection.best, features, targets, seed);
  return result;
}

}  // namespace twinreg
