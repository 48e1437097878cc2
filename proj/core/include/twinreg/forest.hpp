#pragma once

#include <memory>

#include "twinreg/learner.hpp"

namespace twinreg {

/// CART regression tree, variance-reduction splits, `x <= threshold` goes left.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  std::vector<Node> nodes;

  double predict_row(const Matrix& x, Index row) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(k)];
      k = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
  }

  Index depth() const;
  Index leaf_count() const;
};

class ForestModel final : public Model {
 public:
  ForestModel(Index width, ForestParams params, std::vector<RegressionTree> trees);

  LearnerKind kind() const override { return LearnerKind::random_forest; }
  Index input_width() const override { return width_; }
  /// Stored numbers: per internal node (feature, threshold, left, right) and per leaf one value.
  std::size_t parameter_count() const override;
  nlohmann::json to_json() const override;

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }

  /// rows x trees matrix of individual tree outputs.
  Matrix predict_per_tree(const Matrix& x) const;

 protected:
  Vector predict_unchecked(const Matrix& x) const override;

 private:
  Index width_;
  ForestParams params_;
  std::vector<RegressionTree> trees_;
};

/// Bootstrap-aggregated CART forest. Tree t depends only on (seed, t).
std::shared_ptr<const ForestModel> train_forest(const ForestParams& params, const Matrix& features,
                                                const Vector& targets, std::uint64_t seed);

}  // namespace twinreg
