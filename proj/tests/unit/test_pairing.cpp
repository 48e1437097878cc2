#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "test_util.hpp"
#include "twinreg/pairing.hpp"

using namespace twinreg;
using twinreg::testing::make_dataset;

namespace {

Dataset random_dataset(Index n, Index f, std::uint64_t seed) {
  auto rng = make_rng(seed, 99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(n, f);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < f; ++c) x(i, c) = u(rng);
    y[i] = u(rng);
  }
  return make_dataset(x, y);
}

void expect_targets_are_differences(const Dataset& d, const PairedDataset& p) {
  ASSERT_EQ(static_cast<Index>(p.pair_index.size()), p.size());
  for (Index r = 0; r < p.size(); ++r) {
    const auto [i, j] = p.pair_index[static_cast<std::size_t>(r)];
    EXPECT_EQ(p.pair_targets[r], d.targets[i] - d.targets[j]);
    EXPECT_TRUE(p.pair_features.row(r).head(d.feature_count()) == d.features.row(i));
    EXPECT_TRUE(p.pair_features.row(r).segment(d.feature_count(), d.feature_count()) == d.features.row(j));
  }
}

}  // namespace

TEST(FullPairing, CountOrderAndSelfPairs) {
  const Dataset d = random_dataset(5, 3, 1);
  const PairedDataset p = build_pairs(d, PairingStrategy::full(), 0);
  ASSERT_EQ(p.size(), 25);
  expect_targets_are_differences(d, p);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 5; ++j) {
      EXPECT_EQ(p.pair_index[static_cast<std::size_t>(5 * i + j)], std::make_pair(i, j));
    }
    EXPECT_EQ(p.pair_targets[6 * i], 0.0);
  }
}

TEST(FullPairing, SeedIndependent) {
  const Dataset d = random_dataset(7, 2, 2);
  const auto a = build_pairs(d, PairingStrategy::full(), 1);
  const auto b = build_pairs(d, PairingStrategy::full(), 2);
  EXPECT_TRUE(a.pair_features == b.pair_features);
}

TEST(Pairing, AntisymmetricTargets) {
  const Dataset d = random_dataset(12, 2, 3);
  for (const auto& strategy : {PairingStrategy::full(), PairingStrategy::nearest(4)}) {
    const auto p = build_pairs(d, strategy, 0);
    std::map<std::pair<Index, Index>, double> t;
    for (Index r = 0; r < p.size(); ++r) t[p.pair_index[static_cast<std::size_t>(r)]] = p.pair_targets[r];
    for (const auto& [ij, v] : t) {
      const auto it = t.find({ij.second, ij.first});
      if (it != t.end()) {
        EXPECT_EQ(it->second, -v);
      }
    }
  }
}

TEST(Augment, DifferenceColumns) {
  Matrix x(2, 2);
  x << 1, 2, 3, 5;
  const Dataset d = make_dataset(x, Vector::Zero(2));
  const auto p = pairs_from_index(d, {{0, 1}}, true);
  Eigen::RowVectorXd expected(6);
  expected << 1, 2, 3, 5, -2, -3;
  EXPECT_TRUE(p.pair_features.row(0) == expected);

  const Dataset r = random_dataset(9, 3, 4);
  const auto full = build_pairs(r, PairingStrategy::full(true), 0);
  ASSERT_EQ(full.pair_features.cols(), 9);
  const Matrix diff = full.pair_features.leftCols(3) - full.pair_features.middleCols(3, 3);
  EXPECT_LT((full.pair_features.rightCols(3) - diff).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MultiplierPairing, CountsAndPartners) {
  const Dataset d = random_dataset(100, 2, 5);
  const auto p1 = build_pairs(d, PairingStrategy::multiplier(1), 3);
  EXPECT_EQ(p1.size(), 100);
  expect_targets_are_differences(d, p1);

  const auto p4 = build_pairs(d, PairingStrategy::multiplier(4), 3);
  ASSERT_EQ(p4.size(), 400);
  std::map<Index, std::set<Index>> partners;
  for (const auto& [i, j] : p4.pair_index) {
    EXPECT_NE(i, j);
    partners[i].insert(j);
  }
  ASSERT_EQ(partners.size(), 100u);
  for (const auto& [i, s] : partners) EXPECT_EQ(s.size(), 4u) << "row " << i;
}

TEST(MultiplierPairing, DeterministicPerSeed) {
  const Dataset d = random_dataset(30, 2, 6);
  const auto a = build_pairs(d, PairingStrategy::multiplier(3), 11);
  const auto b = build_pairs(d, PairingStrategy::multiplier(3), 11);
  const auto c = build_pairs(d, PairingStrategy::multiplier(3), 12);
  EXPECT_EQ(a.pair_index, b.pair_index);
  EXPECT_NE(a.pair_index, c.pair_index);
}

TEST(MultiplierPairing, FullSizeIsFullPairing) {
  const Dataset d = random_dataset(10, 2, 7);
  const auto m = build_pairs(d, PairingStrategy::multiplier(10), 1);
  const auto f = build_pairs(d, PairingStrategy::full(), 1);
  EXPECT_EQ(m.pair_index, f.pair_index);
  EXPECT_THROW(build_pairs(d, PairingStrategy::multiplier(11), 1), std::invalid_argument);
  EXPECT_THROW(build_pairs(d, PairingStrategy::multiplier(0), 1), std::invalid_argument);
}

TEST(NearestPairing, SymmetricDeduplicatedBounded) {
  const Index n = 40, m = 5;
  const Dataset d = random_dataset(n, 3, 8);
  const auto p = build_pairs(d, PairingStrategy::nearest(m), 0);
  expect_targets_are_differences(d, p);
  std::set<std::pair<Index, Index>> seen(p.pair_index.begin(), p.pair_index.end());
  EXPECT_EQ(seen.size(), p.pair_index.size());
  EXPECT_LE(p.size(), 2 * m * n);
  EXPECT_GE(p.size(), m * n);
  for (const auto& [i, j] : seen) {
    EXPECT_NE(i, j);
    EXPECT_TRUE(seen.count({j, i}));
  }
  // Every row's m nearest other rows are present.
  for (Index i = 0; i < n; ++i) {
    for (Index j : nearest_neighbors(d.features.row(i), d.features, m, i)) EXPECT_TRUE(seen.count({i, j}));
  }
}

TEST(NearestPairing, RangeChecked) {
  const Dataset d = random_dataset(6, 2, 9);
  EXPECT_THROW(build_pairs(d, PairingStrategy::nearest(6), 0), std::invalid_argument);
  EXPECT_THROW(build_pairs(d, PairingStrategy::nearest(0), 0), std::invalid_argument);
  EXPECT_NO_THROW(build_pairs(d, PairingStrategy::nearest(5), 0));
}

TEST(NearestNeighbors, Examples) {
  Matrix pts(3, 1);
  pts << 0, 1, 10;
  Eigen::RowVectorXd q(1);
  q << 0.4;
  EXPECT_EQ(nearest_neighbors(q, pts, 2), (std::vector<Index>{0, 1}));
  q << 10.0;
  EXPECT_EQ(nearest_neighbors(q, pts, 1).front(), 2);
  q << 6.0;
  EXPECT_EQ(nearest_neighbors(q, pts, 3), (std::vector<Index>{2, 1, 0}));
  EXPECT_THROW(nearest_neighbors(q, pts, 0), std::invalid_argument);
  EXPECT_THROW(nearest_neighbors(q, pts, 4), std::invalid_argument);
}

TEST(NearestNeighbors, TiesToLowerIndexAndCompleteness) {
  Matrix pts(4, 1);
  pts << 1, -1, 1, -1;
  Eigen::RowVectorXd q(1);
  q << 0.0;
  EXPECT_EQ(nearest_neighbors(q, pts, 4), (std::vector<Index>{0, 1, 2, 3}));

  const Dataset d = random_dataset(25, 3, 10);
  const auto all = nearest_neighbors(d.features.row(3), d, 25);
  std::vector<Index> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  for (Index i = 0; i < 25; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
  EXPECT_EQ(all.front(), 3);
  for (std::size_t k = 1; k < all.size(); ++k) {
    EXPECT_LE((d.features.row(all[k - 1]) - d.features.row(3)).squaredNorm(),
              (d.features.row(all[k]) - d.features.row(3)).squaredNorm());
  }
}
