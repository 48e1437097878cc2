#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "twinreg/data.hpp"

namespace twinreg {

struct FullPairing {};
struct MultiplierPairing {
  Index k = 1;
};
struct NearestNeighborPairing {
  Index m = 1;
};

struct PairingStrategy {
  std::variant<FullPairing, MultiplierPairing, NearestNeighborPairing> mode = FullPairing{};
  bool augment = false;

  static PairingStrategy full(bool augment = false) { return {FullPairing{}, augment}; }
  static PairingStrategy multiplier(Index k, bool augment = false) {
    return {MultiplierPairing{k}, augment};
  }
  static PairingStrategy nearest(Index m, bool augment = false) {
    return {NearestNeighborPairing{m}, augment};
  }

  void validate(Index n) const;
};

/// Ordered pairs (i, j) with features [x_i, x_j (, x_i - x_j)] and target y_i - y_j.
struct PairedDataset {
  std::vector<std::pair<Index, Index>> pair_index;
  Matrix pair_features;
  Vector pair_targets;
  Index feature_count = 0;
  bool augment = false;

  Index size() const { return pair_targets.size(); }
};

inline Index pair_width(Index f, bool augment) { return augment ? 3 * f : 2 * f; }

/// Writes the pair row for (a, b) into `out.row(row)`.
void write_pair_row(Eigen::Ref<Matrix> out, Index row, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b, bool augment);

/// Row-wise pairing of two equally sized matrices.
Matrix make_pair_features(const Matrix& left, const Matrix& right, bool augment);

/// Builds pair features/targets for an explicit list of pairs over `d`.
PairedDataset pairs_from_index(const Dataset& d, std::vector<std::pair<Index, Index>> index,
                               bool augment);

/// Full: all n^2 ordered pairs, self-pairs included, row-major.
/// Multiplier(k): k distinct partners per row drawn from the other n-1 rows; k == n is the
/// full pairing.
/// Nearest(m): {(i,j), (j,i)} for the m nearest other rows j of every i, de-duplicated.
PairedDataset build_pairs(const Dataset& train, const PairingStrategy& strategy,
                          std::uint64_t seed);

/// Indices of the m rows of `points` closest to `query` (Euclidean), ascending by distance,
/// ties to the lower index. `exclude` removes one row from consideration.
std::vector<Index> nearest_neighbors(const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                     const Matrix& points, Index m,
                                     std::optional<Index> exclude = std::nullopt);

inline std::vector<Index> nearest_neighbors(const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                            const Dataset& train, Index m) {
  return nearest_neighbors(query, train.features, m);
}

}  // namespace twinreg
