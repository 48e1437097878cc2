#include "twinreg/knn.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "twinreg/pairing.hpp"

namespace twinreg {

KnnModel::KnnModel(Matrix features, Vector targets, Index k)
    : features_(std::move(features)), targets_(std::move(targets)), k_(k) {
  if (features_.rows() < 1) throw std::invalid_argument("knn: no training rows");
  if (features_.rows() != targets_.size()) throw std::invalid_argument("knn: row/target mismatch");
  if (k_ < 1 || k_ > features_.rows()) {
    throw std::invalid_argument("knn: k=" + std::to_string(k_) + " must lie in [1, " +
                                std::to_string(features_.rows()) + "]");
  }
}

Vector KnnModel::predict_unchecked(const Matrix& x) const {
  Vector out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (Index j : nearest_neighbors(x.row(r), features_, k_)) sum += targets_[j];
    out[r] = sum / static_cast<double>(k_);
  }
  return out;
}

}  // namespace twinreg
