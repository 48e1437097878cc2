#include "twinreg/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "twinreg/random.hpp"

namespace twinreg {

Index RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  Index best = 0;
  std::vector<std::pair<int, Index>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [k, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& nd = nodes[static_cast<std::size_t>(k)];
    if (nd.feature >= 0) {
      stack.emplace_back(nd.left, d + 1);
      stack.emplace_back(nd.right, d + 1);
    }
  }
  return best;
}

Index RegressionTree::leaf_count() const {
  return static_cast<Index>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

ForestModel::ForestModel(Index width, ForestParams params, std::vector<RegressionTree> trees)
    : width_(width), params_(params), trees_(std::move(trees)) {
  if (trees_.empty()) throw std::invalid_argument("forest: no trees");
}

std::size_t ForestModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& t : trees_) {
    for (const auto& nd : t.nodes) total += nd.feature >= 0 ? 4 : 1;
  }
  return total;
}

Vector ForestModel::predict_unchecked(const Matrix& x) const {
  Vector out = Vector::Zero(x.rows());
  for (const auto& tree : trees_) {
    for (Index r = 0; r < x.rows(); ++r) out[r] += tree.predict_row(x, r);
  }
  out /= static_cast<double>(trees_.size());
  return out;
}

Matrix ForestModel::predict_per_tree(const Matrix& x) const {
  if (x.cols() != width_) throw std::invalid_argument("forest: feature width mismatch");
  Matrix out(x.rows(), static_cast<Index>(trees_.size()));
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    for (Index r = 0; r < x.rows(); ++r) out(r, static_cast<Index>(t)) = trees_[t].predict_row(x, r);
  }
  return out;
}

namespace {

struct Frame {
  int node;
  Index begin;
  Index end;
  Index depth;
};

class TreeBuilder {
 public:
  TreeBuilder(const ForestParams& params, const Matrix& x, const Vector& y,
              const std::vector<std::vector<int>>& presorted)
      : params_(params), x_(x), y_(y), presorted_(presorted), features_(x.cols()) {
    mtry_ = std::max<Index>(1, static_cast<Index>(params.max_features * static_cast<double>(features_)));
    mtry_ = std::min(mtry_, features_);
  }

  RegressionTree build(Rng& rng) {
    const Index n = x_.rows();
    weight_.assign(static_cast<std::size_t>(n), 0.0);
    if (params_.bootstrap) {
      std::uniform_int_distribution<Index> pick(0, n - 1);
      for (Index k = 0; k < n; ++k) weight_[static_cast<std::size_t>(pick(rng))] += 1.0;
    } else {
      std::fill(weight_.begin(), weight_.end(), 1.0);
    }

    // In-bag rows, kept sorted per feature.
    order_.assign(static_cast<std::size_t>(features_), {});
    for (Index f = 0; f < features_; ++f) {
      auto& ord = order_[static_cast<std::size_t>(f)];
      ord.reserve(static_cast<std::size_t>(n));
      for (int i : presorted_[static_cast<std::size_t>(f)])
        if (weight_[static_cast<std::size_t>(i)] > 0.0) ord.push_back(i);
    }
    goes_left_.assign(static_cast<std::size_t>(n), 0);
    scratch_.resize(static_cast<std::size_t>(n));
    feature_pool_.resize(static_cast<std::size_t>(features_));

    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<Frame> stack{{0, 0, static_cast<Index>(order_[0].size()), 0}};
    while (!stack.empty()) {
      const Frame fr = stack.back();
      stack.pop_back();
      split_node(tree, fr, rng, stack);
    }
    return tree;
  }

 private:
  void split_node(RegressionTree& tree, const Frame& fr, Rng& rng, std::vector<Frame>& stack) {
    const auto& base = order_[0];
    double w_total = 0.0, s_total = 0.0, s2_total = 0.0;
    for (Index p = fr.begin; p < fr.end; ++p) {
      const auto i = static_cast<std::size_t>(base[static_cast<std::size_t>(p)]);
      w_total += weight_[i];
      s_total += weight_[i] * y_[static_cast<Index>(i)];
      s2_total += weight_[i] * y_[static_cast<Index>(i)] * y_[static_cast<Index>(i)];
    }
    tree.nodes[static_cast<std::size_t>(fr.node)].value = s_total / w_total;

    const double parent_score = s_total * s_total / w_total;
    const double tol = 1e-12 * std::max(s2_total, 1e-300);
    const double min_leaf = static_cast<double>(params_.min_samples_leaf);
    if (fr.depth >= params_.max_depth || w_total < static_cast<double>(params_.min_samples_split) ||
        w_total < 2.0 * min_leaf || s2_total - parent_score <= tol) {
      return;
    }

    // Candidate features: mtry drawn without replacement, scanned in index order.
    std::iota(feature_pool_.begin(), feature_pool_.end(), Index{0});
    for (Index t = 0; t < mtry_ && mtry_ < features_; ++t) {
      std::uniform_int_distribution<Index> pick(t, features_ - 1);
      std::swap(feature_pool_[static_cast<std::size_t>(t)], feature_pool_[static_cast<std::size_t>(pick(rng))]);
    }
    std::sort(feature_pool_.begin(), feature_pool_.begin() + mtry_);

    double best_score = parent_score + tol;
    Index best_feature = -1;
    Index best_pos = -1;
    double best_threshold = 0.0;
    for (Index c = 0; c < mtry_; ++c) {
      const Index f = feature_pool_[static_cast<std::size_t>(c)];
      const auto& ord = order_[static_cast<std::size_t>(f)];
      const double* col = x_.col(f).data();
      double wl = 0.0, sl = 0.0;
      for (Index p = fr.begin; p + 1 < fr.end; ++p) {
        const auto i = ord[static_cast<std::size_t>(p)];
        wl += weight_[static_cast<std::size_t>(i)];
        sl += weight_[static_cast<std::size_t>(i)] * y_[i];
        const double xi = col[i];
        const double xn = col[ord[static_cast<std::size_t>(p) + 1]];
        if (!(xn > xi)) continue;
        const double wr = w_total - wl;
        if (wl < min_leaf) continue;
        if (wr < min_leaf) break;
        const double sr = s_total - sl;
        const double score = sl * sl / wl + sr * sr / wr;
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_pos = p;
          double mid = xi + 0.5 * (xn - xi);
          if (!(mid < xn)) mid = xi;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return;

    const auto& chosen = order_[static_cast<std::size_t>(best_feature)];
    for (Index p = fr.begin; p < fr.end; ++p) {
      goes_left_[static_cast<std::size_t>(chosen[static_cast<std::size_t>(p)])] = p <= best_pos ? 1 : 0;
    }
    const Index n_left = best_pos - fr.begin + 1;
    for (auto& ord : order_) {
      Index l = fr.begin;
      Index r = 0;
      for (Index p = fr.begin; p < fr.end; ++p) {
        const int i = ord[static_cast<std::size_t>(p)];
        if (goes_left_[static_cast<std::size_t>(i)]) {
          ord[static_cast<std::size_t>(l++)] = i;
        } else {
          scratch_[static_cast<std::size_t>(r++)] = i;
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + r, ord.begin() + l);
    }

    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& nd = tree.nodes[static_cast<std::size_t>(fr.node)];
    nd.feature = static_cast<int>(best_feature);
    nd.threshold = best_threshold;
    nd.left = left;
    nd.right = left + 1;
    stack.push_back({left + 1, fr.begin + n_left, fr.end, fr.depth + 1});
    stack.push_back({left, fr.begin, fr.begin + n_left, fr.depth + 1});
  }

  const ForestParams& params_;
  const Matrix& x_;
  const Vector& y_;
  const std::vector<std::vector<int>>& presorted_;
  Index features_;
  Index mtry_;
  std::vector<double> weight_;
  std::vector<std::vector<int>> order_;
  std::vector<char> goes_left_;
  std::vector<int> scratch_;
  std::vector<Index> feature_pool_;
};

}  // namespace

std::shared_ptr<const ForestModel> train_forest(const ForestParams& params, const Matrix& features,
                                                const Vector& targets, std::uint64_t seed) {
  params.validate();
  if (features.rows() < 1) throw std::invalid_argument("forest fit: no training rows");
  if (features.rows() != targets.size()) throw std::invalid_argument("forest fit: row/target mismatch");
  if (features.cols() < 1) throw std::invalid_argument("forest fit: no features");
  if (!features.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("forest fit: non-finite input");
  }
  if (features.rows() > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("forest fit: too many rows");
  }

  const Index n = features.rows();
  std::vector<std::vector<int>> presorted(static_cast<std::size_t>(features.cols()));
  for (Index f = 0; f < features.cols(); ++f) {
    auto& ord = presorted[static_cast<std::size_t>(f)];
    ord.resize(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    const auto col = features.col(f);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return col[a] < col[b]; });
  }

  TreeBuilder builder(params, features, targets, presorted);
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_estimators));
  for (Index t = 0; t < params.n_estimators; ++t) {
    auto rng = make_rng(seed, 1000 + static_cast<std::uint64_t>(t));
    trees.push_back(builder.build(rng));
  }
  return std::make_shared<const ForestModel>(features.cols(), params, std::move(trees));
}

}  // namespace twinreg
