#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace twinreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Feature matrix (one row per sample) plus targets. Immutable by convention
/// once built; every pipeline stage takes it by const reference.
struct Dataset {
  Matrix features;
  Vector targets;
  std::string name;
  std::vector<std::string> feature_names;

  Dataset() = default;
  Dataset(Matrix x, Vector y, std::string name = {}, std::vector<std::string> feature_names = {});

  Index rows() const { return features.rows(); }
  Index feature_count() const { return features.cols(); }
  bool empty() const { return features.rows() == 0; }

  /// Throws std::invalid_argument on shape mismatch or non-finite values.
  void validate() const;

  Dataset subset(const std::vector<Index>& rows) const;
};

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct TestFunctionDomain {
  Interval x1{-1.0, 1.0};
  Interval x2{-1.0, 1.0};
};

struct RclDomain {
  Interval v0{1.0, 2.0};
  Interval omega{0.5, 2.0};
  Interval t{0.0, 6.283185307179586};
  Interval r{0.5, 2.0};
  Interval l{0.5, 2.0};
  Interval c{0.5, 2.0};
};

struct WheatstoneDomain {
  Interval u{1.0, 2.0};
  Interval r1{0.5, 2.0};
  Interval r2{0.5, 2.0};
  Interval r3{0.5, 2.0};
};

double test_function(double x1, double x2);
double rcl_current(double v0, double omega, double t, double r, double l, double c);
double wheatstone_voltage(double u, double r1, double r2, double r3);

Dataset generate_test_function(Index n, std::uint64_t seed, double noise_std = 0.0,
                               const TestFunctionDomain& domain = {});
Dataset generate_rcl(Index n, std::uint64_t seed, double noise_std = 0.1,
                     const RclDomain& domain = {});
Dataset generate_wheatstone(Index n, std::uint64_t seed, double noise_std = 0.1,
                            const WheatstoneDomain& domain = {});

/// Generates one of the built-in synthetic sets by key ("TF", "RCL", "WSB").
/// n = 0 selects the default size (1000 / 4000 / 200).
Dataset generate_synthetic(const std::string& key, Index n, std::uint64_t seed);
Dataset generate_synthetic(const std::string& key, Index n, std::uint64_t seed, double noise_std);
bool is_synthetic_key(const std::string& key);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

using ColumnRef = std::variant<std::string, Index>;

/// Numeric CSV with a mandatory header row. The target column is removed from
/// the features; row order is preserved. Throws CsvError.
Dataset load_csv(const std::filesystem::path& path, const ColumnRef& target_column);
Dataset parse_csv(std::string_view text, const ColumnRef& target_column, std::string name = {});

/// Writes features followed by a trailing target column named `target_name`.
void save_csv(const Dataset& d, const std::filesystem::path& path,
              const std::string& target_name = "y");

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitFractions {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

struct SplitCounts {
  Index train = 100;
  Index test = 100;
};

struct SplitSpec {
  std::uint64_t seed = 0;
  std::variant<SplitFractions, SplitCounts> mode = SplitFractions{};

  void validate(Index n) const;
};

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
};

struct Split {
  Dataset train;
  Dataset validation;
  Dataset test;
  SplitIndices indices;
};

SplitIndices split_indices(Index n, const SplitSpec& spec);
Split split(const Dataset& d, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-feature z-scoring with population statistics of the training rows.
/// Zero-variance features get std 1, so they map to zero after centering.
struct Scaler {
  Vector mean;
  Vector stddev;
  std::optional<double> target_mean;
  std::optional<double> target_stddev;

  Matrix transform(const Matrix& x) const;
  Matrix inverse_transform(const Matrix& z) const;
  Vector transform_row(const Vector& x) const;
};

Scaler fit_scaler(const Dataset& train, bool with_targets = false);
Dataset apply_scaler(const Scaler& s, const Dataset& d);
Dataset invert_scaler(const Scaler& s, const Dataset& d);

}  // namespace twinreg
