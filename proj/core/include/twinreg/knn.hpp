#pragma once

#include <memory>

#include "twinreg/learner.hpp"

namespace twinreg {

/// Brute-force k-NN regression: mean target of the k nearest stored rows
/// (Euclidean, ties to the lower row index).
class KnnModel final : public Model {
 public:
  KnnModel(Matrix features, Vector targets, Index k);

  LearnerKind kind() const override { return LearnerKind::knn; }
  Index input_width() const override { return features_.cols(); }
  /// Stored rows times (features + target).
  std::size_t parameter_count() const override {
    return static_cast<std::size_t>(features_.rows() * (features_.cols() + 1));
  }
  nlohmann::json to_json() const override;

  Index k() const { return k_; }
  const Matrix& features() const { return features_; }
  const Vector& targets() const { return targets_; }

 protected:
  Vector predict_unchecked(const Matrix& x) const override;

 private:
  Matrix features_;
  Vector targets_;
  Index k_;
};

}  // namespace twinreg
