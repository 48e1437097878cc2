#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "twinreg/data.hpp"
#include "twinreg/errors.hpp"

using namespace twinreg;

TEST(TestFunction, FormulaPoints) {
  EXPECT_DOUBLE_EQ(test_function(1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(test_function(0.0, 0.0), -1.0);
}

TEST(TestFunction, ShapeAndNoiselessResidual) {
  const Dataset d = generate_test_function(1000, 7);
  ASSERT_EQ(d.rows(), 1000);
  ASSERT_EQ(d.feature_count(), 2);
  for (Index i = 0; i < d.rows(); ++i) {
    const double x1 = d.features(i, 0), x2 = d.features(i, 1);
    EXPECT_GE(x1, -1.0);
    EXPECT_LE(x1, 1.0);
    const double expected = x1 * x1 * x1 + x1 * x1 - x1 - 1.0 + x1 * x2 + std::sin(x2);
    EXPECT_NEAR(d.targets[i], expected, 1e-12);
  }
}

TEST(TestFunction, SameSeedBitIdentical) {
  const Dataset a = generate_test_function(200, 3);
  const Dataset b = generate_test_function(200, 3);
  EXPECT_TRUE(a.features == b.features);
  EXPECT_TRUE(a.targets == b.targets);
  const Dataset c = generate_test_function(200, 4);
  EXPECT_FALSE(a.features == c.features);
}

TEST(TestFunction, ZeroRowsRejected) { EXPECT_THROW(generate_test_function(0, 1), std::invalid_argument); }

TEST(Rcl, ResonanceAndZeroDrive) {
  // omega L = 1 / (omega C) with omega = 2, L = 0.5, C = 0.5.
  EXPECT_NEAR(rcl_current(1.0, 2.0, 0.0, 1.0, 0.5, 0.5), 1.0, 1e-15);
  EXPECT_EQ(rcl_current(0.0, 1.3, 0.7, 0.9, 1.1, 0.6), 0.0);
}

TEST(Rcl, ShapeAndNoiseSeparation) {
  const Dataset noisy = generate_rcl(4000, 11);
  EXPECT_EQ(noisy.rows(), 4000);
  EXPECT_EQ(noisy.feature_count(), 6);
  const Dataset clean = generate_rcl(4000, 11, 0.0);
  // Same inputs with and without noise.
  EXPECT_TRUE(noisy.features == clean.features);
  double ss = 0.0;
  for (Index i = 0; i < clean.rows(); ++i) {
    const auto r = clean.features.row(i);
    EXPECT_NEAR(clean.targets[i], rcl_current(r[0], r[1], r[2], r[3], r[4], r[5]), 1e-12);
    ss += std::pow(noisy.targets[i] - clean.targets[i], 2);
  }
  EXPECT_NEAR(std::sqrt(ss / 4000.0), 0.1, 0.01);
}

TEST(Rcl, NonpositiveRangeRejected) {
  RclDomain dom;
  dom.r = {0.0, 1.0};
  EXPECT_THROW(generate_rcl(10, 1, 0.1, dom), std::invalid_argument);
  dom = {};
  dom.omega = {-1.0, 1.0};
  EXPECT_THROW(generate_rcl(10, 1, 0.1, dom), std::invalid_argument);
}

TEST(Wheatstone, BalancedAndZeroSource) {
  EXPECT_DOUBLE_EQ(wheatstone_voltage(1.7, 1.2, 1.2, 1.2), 0.0);
  EXPECT_DOUBLE_EQ(wheatstone_voltage(0.0, 0.6, 1.9, 1.1), 0.0);
  const Dataset d = generate_wheatstone(200, 5);
  EXPECT_EQ(d.rows(), 200);
  EXPECT_EQ(d.feature_count(), 4);
  WheatstoneDomain dom;
  dom.r2 = {-0.5, 1.0};
  EXPECT_THROW(generate_wheatstone(10, 1, 0.1, dom), std::invalid_argument);
}

TEST(Synthetic, KeysAndDefaults) {
  EXPECT_EQ(generate_synthetic("TF", 0, 1).rows(), 1000);
  EXPECT_EQ(generate_synthetic("RCL", 0, 1).rows(), 4000);
  EXPECT_EQ(generate_synthetic("WSB", 0, 1).rows(), 200);
  EXPECT_THROW(generate_synthetic("XX", 0, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(Csv, SingleRow) {
  const Dataset d = parse_csv("a,b,y\n1,2,3\n", std::string("y"));
  ASSERT_EQ(d.rows(), 1);
  ASSERT_EQ(d.feature_count(), 2);
  EXPECT_EQ(d.features(0, 0), 1.0);
  EXPECT_EQ(d.features(0, 1), 2.0);
  EXPECT_EQ(d.targets[0], 3.0);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
}

TEST(Csv, TargetByIndexAndMiddleColumn) {
  const Dataset d = parse_csv("a,y,b\n1,9,2\n4,8,5\n", Index{1});
  EXPECT_EQ(d.targets, (Vector(2) << 9, 8).finished());
  EXPECT_EQ(d.features(1, 1), 5.0);
  const Dataset last = parse_csv("a,y,b\n1,9,2\n", Index{-1});
  EXPECT_EQ(last.targets[0], 2.0);
}

TEST(Csv, BlankCellNamesLocation) {
  try {
    parse_csv("a,b,y\n1,2,3\n4,,6\n", std::string("y"));
    FAIL() << "expected CsvError";
  } catch (const CsvError& e) {
    EXPECT_EQ(e.kind(), CsvError::Kind::non_numeric);
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 2u);
  }
}

TEST(Csv, DistinctErrorKinds) {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const CsvError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no CsvError";
    return CsvError::Kind::empty_file;
  };
  EXPECT_EQ(kind_of([] { parse_csv("a,b\n1,2\n", std::string("y")); }), CsvError::Kind::missing_target);
  EXPECT_EQ(kind_of([] { parse_csv("a,b,y\n1,x,3\n", std::string("y")); }), CsvError::Kind::non_numeric);
  EXPECT_EQ(kind_of([] { parse_csv("a,b,y\n1,2\n", std::string("y")); }), CsvError::Kind::ragged_row);
  EXPECT_EQ(kind_of([] { parse_csv("", std::string("y")); }), CsvError::Kind::empty_file);
  EXPECT_EQ(kind_of([] { load_csv("/nonexistent/file.csv", std::string("y")); }), CsvError::Kind::missing_file);
}

TEST(Csv, SaveLoadRoundTrip) {
  const Dataset d = generate_wheatstone(20, 2);
  const auto path = std::filesystem::temp_directory_path() / "twinreg_test_roundtrip.csv";
  save_csv(d, path);
  const Dataset back = load_csv(path, std::string("y"));
  EXPECT_TRUE(back.features == d.features);
  EXPECT_TRUE(back.targets == d.targets);
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------

TEST(Split, FractionSizesDisjointCover) {
  const SplitIndices s = split_indices(1000, SplitSpec{42, SplitFractions{0.7, 0.1, 0.2}});
  EXPECT_EQ(s.train.size(), 700u);
  EXPECT_EQ(s.validation.size(), 100u);
  EXPECT_EQ(s.test.size(), 200u);
  std::set<Index> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 1000u);
}

TEST(Split, FixedCounts) {
  const SplitIndices s = split_indices(1599, SplitSpec{1, SplitCounts{100, 100}});
  EXPECT_EQ(s.train.size(), 100u);
  EXPECT_EQ(s.test.size(), 100u);
  EXPECT_TRUE(s.validation.empty());
  std::set<Index> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 200u);
  EXPECT_THROW(split_indices(150, SplitSpec{1, SplitCounts{100, 100}}), std::invalid_argument);
}

TEST(Split, Deterministic) {
  const SplitSpec spec{9, SplitFractions{}};
  const auto a = split_indices(300, spec);
  const auto b = split_indices(300, spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  const auto c = split_indices(300, SplitSpec{10, SplitFractions{}});
  EXPECT_NE(a.train, c.train);
}

TEST(Split, InvalidFractions) {
  EXPECT_THROW(split_indices(10, SplitSpec{0, SplitFractions{0.5, 0.1, 0.1}}), std::invalid_argument);
  EXPECT_THROW(split_indices(10, SplitSpec{0, SplitFractions{1.2, -0.1, -0.1}}), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(Scaler, ZScoreOracle) {
  Matrix x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  const Dataset d(x, Vector::Zero(3));
  const Scaler s = fit_scaler(d);
  const Matrix z = s.transform(x);
  // Population std of {1,2,3} is sqrt(2/3).
  const double sd = std::sqrt(((1.0 - 2.0) * (1.0 - 2.0) + (3.0 - 2.0) * (3.0 - 2.0)) / 3.0);
  EXPECT_NEAR(z(0, 0), -1.0 / sd, 1e-12);
  EXPECT_NEAR(z(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(z(2, 0), 1.0 / sd, 1e-12);
  EXPECT_NEAR(z(2, 0), 1.2247448713915890, 1e-12);
  EXPECT_EQ(z.col(1), Vector::Zero(3));
}

TEST(Scaler, TrainStatisticsAndRoundTrip) {
  const Dataset d = generate_rcl(300, 4);
  const Scaler s = fit_scaler(d, true);
  const Dataset z = apply_scaler(s, d);
  for (Index c = 0; c < z.feature_count(); ++c) {
    const Vector col = z.features.col(c);
    EXPECT_NEAR(col.mean(), 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt((col.array() - col.mean()).square().mean()), 1.0, 1e-9);
  }
  const Dataset back = invert_scaler(s, z);
  EXPECT_LT((back.features - d.features).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((back.targets - d.targets).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Scaler, EmptyRejected) { EXPECT_THROW(fit_scaler(Dataset{}), std::invalid_argument); }

TEST(DatasetType, ValidateRejectsNonFinite) {
  Matrix x(2, 1);
  x << 1, std::nan("");
  EXPECT_THROW(Dataset(x, Vector::Zero(2)).validate(), std::invalid_argument);
  EXPECT_THROW(Dataset(Matrix::Zero(2, 1), Vector::Zero(3)).validate(), std::invalid_argument);
}
