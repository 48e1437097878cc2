#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "twinreg/data.hpp"
#include "twinreg/random.hpp"

namespace twinreg {

/// A regression problem with known ground truth, for Monte-Carlo diagnostics.
struct BvTask {
  std::function<Vector(const Matrix&)> truth;
  std::function<Matrix(Rng&)> sample_inputs;  // inputs of one training set D
  double noise_std = 0.0;
  Matrix eval_points;

  /// One noisy training set.
  Dataset draw(Rng& rng) const;
};

/// Fits on `train` and predicts `eval`. Randomness must come from `seed` only.
using BvEstimator = std::function<Vector(const Dataset& train, const Matrix& eval, std::uint64_t seed)>;

enum class BvMemberData {
  shared,       // both members see the same D
  independent,  // member B sees its own D'
};

struct BvConfig {
  Index trials = 500;
  std::uint64_t seed = 0;
  BvMemberData member_data = BvMemberData::shared;
  double tolerance_se = 3.0;

  void validate() const;
};

/// Moments of the two-member ensemble 1/2 (f_A + f_B), averaged over the evaluation points.
struct BvRecord {
  Index trials = 0;
  double mse = 0.0;     // Monte-Carlo mean of the test squared error
  double mse_se = 0.0;  // its standard error
  double bias2 = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double var = 0.0;  // (var_a + var_b) / 2
  double cov = 0.0;
  double cov_se = 0.0;
  double noise_var = 0.0;
  double rhs = 0.0;  // bias2 + var / 2 + cov / 2 + noise_var
  double gap = 0.0;  // mse - rhs
  bool degenerate = false;  // zero Monte-Carlo spread; the check is not informative
  bool consistent = false;  // |gap| <= tolerance_se * mse_se (exact match when degenerate)
  std::string note;

  nlohmann::json to_json() const;
};

BvRecord bias_variance_diagnostic(const BvTask& task, const BvEstimator& member_a,
                                  const BvEstimator& member_b, const BvConfig& cfg);

/// 1-D task: truth x^3 - x on [-1, 1], `n_train` uniform inputs, Gaussian noise,
/// `n_eval` evenly spaced evaluation points.
BvTask polynomial_task(Index n_train = 30, double noise_std = 0.3, Index n_eval = 41);

/// Least-squares polynomial of the given degree on the first input column,
/// optionally fitted on a bootstrap resample drawn from the seed.
BvEstimator polynomial_estimator(Index degree, bool bootstrap);

/// Returns the task's noiseless truth.
BvEstimator oracle_estimator(const BvTask& task);

}  // namespace twinreg
