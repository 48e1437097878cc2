#include "twinreg/pairing.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "twinreg/random.hpp"

namespace twinreg {

void PairingStrategy::validate(Index n) const {
  if (n < 1) throw std::invalid_argument("pairing: training set is empty");
  if (const auto* mult = std::get_if<MultiplierPairing>(&mode)) {
    if (mult->k < 1) throw std::invalid_argument("pairing: multiplier k must be >= 1");
    if (mult->k > n) {
      throw std::invalid_argument("pairing: multiplier k=" + std::to_string(mult->k) +
                                  " exceeds training size " + std::to_string(n));
    }
    if (mult->k < n && n < 2) {
      throw std::invalid_argument("pairing: multiplier mode needs at least two rows");
    }
  } else if (const auto* nn = std::get_if<NearestNeighborPairing>(&mode)) {
    if (nn->m < 1 || nn->m >= n) {
      throw std::invalid_argument("pairing: nearest-neighbor m=" + std::to_string(nn->m) +
                                  " must satisfy 1 <= m < n=" + std::to_string(n));
    }
  }
}

void write_pair_row(Eigen::Ref<Matrix> out, Index row, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b, bool augment) {
  const Index f = a.size();
  out.row(row).segment(0, f) = a;
  out.row(row).segment(f, f) = b;
  if (augment) out.row(row).segment(2 * f, f) = a - b;
}

Matrix make_pair_features(const Matrix& left, const Matrix& right, bool augment) {
  if (left.rows() != right.rows() || left.cols() != right.cols()) {
    throw std::invalid_argument("make_pair_features: shape mismatch");
  }
  const Index f = left.cols();
  Matrix out(left.rows(), pair_width(f, augment));
  out.leftCols(f) = left;
  out.middleCols(f, f) = right;
  if (augment) out.rightCols(f) = left - right;
  return out;
}

PairedDataset pairs_from_index(const Dataset& d, std::vector<std::pair<Index, Index>> index,
                               bool augment) {
  PairedDataset p;
  p.feature_count = d.feature_count();
  p.augment = augment;
  const Index rows = static_cast<Index>(index.size());
  const Index f = d.feature_count();
  p.pair_features.resize(rows, pair_width(f, augment));
  p.pair_targets.resize(rows);
  // Column-wise fill: Eigen matrices are column-major.
  for (Index c = 0; c < f; ++c) {
    auto left = p.pair_features.col(c);
    auto right = p.pair_features.col(f + c);
    const auto src = d.features.col(c);
    for (Index r = 0; r < rows; ++r) {
      const auto& [i, j] = index[static_cast<std::size_t>(r)];
      left[r] = src[i];
      right[r] = src[j];
    }
    if (augment) p.pair_features.col(2 * f + c) = left - right;
  }
  for (Index r = 0; r < rows; ++r) {
    const auto& [i, j] = index[static_cast<std::size_t>(r)];
    p.pair_targets[r] = d.targets[i] - d.targets[j];
  }
  p.pair_index = std::move(index);
  return p;
}

PairedDataset build_pairs(const Dataset& train, const PairingStrategy& strategy,
                          std::uint64_t seed) {
  const Index n = train.rows();
  strategy.validate(n);
  std::vector<std::pair<Index, Index>> index;

  auto full = [&] {
    index.reserve(static_cast<std::size_t>(n * n));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) index.emplace_back(i, j);
  };

  if (std::holds_alternative<FullPairing>(strategy.mode)) {
    full();
  } else if (const auto* mult = std::get_if<MultiplierPairing>(&strategy.mode)) {
    if (mult->k == n) {
      full();
    } else {
      auto rng = make_rng(seed, 11);
      index.reserve(static_cast<std::size_t>(mult->k * n));
      std::vector<Index> others(static_cast<std::size_t>(n - 1));
      for (Index i = 0; i < n; ++i) {
        // Partial Fisher-Yates over the other rows: k draws without replacement.
        for (Index t = 0, v = 0; v < n; ++v)
          if (v != i) others[static_cast<std::size_t>(t++)] = v;
        for (Index t = 0; t < mult->k; ++t) {
          std::uniform_int_distribution<Index> pick(t, n - 2);
          std::swap(others[static_cast<std::size_t>(t)], others[static_cast<std::size_t>(pick(rng))]);
          index.emplace_back(i, others[static_cast<std::size_t>(t)]);
        }
      }
    }
  } else {
    const Index m = std::get<NearestNeighborPairing>(strategy.mode).m;
    std::unordered_set<std::uint64_t> seen;
    auto key = [n](Index i, Index j) { return static_cast<std::uint64_t>(i * n + j); };
    auto emit = [&](Index i, Index j) {
      if (seen.insert(key(i, j)).second) index.emplace_back(i, j);
    };
    for (Index i = 0; i < n; ++i) {
      for (Index j : nearest_neighbors(train.features.row(i), train.features, m, i)) {
        emit(i, j);
        emit(j, i);
      }
    }
  }
  return pairs_from_index(train, std::move(index), strategy.augment);
}

std::vector<Index> nearest_neighbors(const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                     const Matrix& points, Index m, std::optional<Index> exclude) {
  const Index n = points.rows();
  const Index available = exclude && *exclude >= 0 && *exclude < n ? n - 1 : n;
  if (m < 1 || m > available) {
    throw std::invalid_argument("nearest_neighbors: m=" + std::to_string(m) +
                                " out of range [1, " + std::to_string(available) + "]");
  }
  if (query.size() != points.cols()) {
    throw std::invalid_argument("nearest_neighbors: query width mismatch");
  }
  const Vector dist = (points.rowwise() - query).rowwise().squaredNorm();
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(available));
  for (Index i = 0; i < n; ++i)
    if (!exclude || *exclude != i) order.push_back(i);
  auto closer = [&](Index a, Index b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + m, order.end(), closer);
  order.resize(static_cast<std::size_t>(m));
  return order;
}

}  // namespace twinreg
