#include "twinreg/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "twinreg/random.hpp"

namespace twinreg {

namespace {

constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kSplitStream = 3;

void require_rows(Index n, const char* what) {
  if (n < 1) {
    throw std::invalid_argument(std::string(what) + ": n must be >= 1");
  }
}

void require_positive(const Interval& iv, const char* name) {
  if (!(iv.lo > 0.0) || !(iv.hi >= iv.lo)) {
    throw std::invalid_argument(std::string("sampling range for ") + name +
                                " must be strictly positive and ordered");
  }
}

void require_ordered(const Interval& iv, const char* name) {
  if (!(iv.hi >= iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
    throw std::invalid_argument(std::string("sampling range for ") + name + " is invalid");
  }
}

double draw(Rng& rng, const Interval& iv) {
  if (iv.lo == iv.hi) return iv.lo;
  return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

void add_noise(Vector& y, std::uint64_t seed, double noise_std) {
  if (noise_std < 0.0 || !std::isfinite(noise_std)) {
    throw std::invalid_argument("noise_std must be finite and >= 0");
  }
  if (noise_std == 0.0) return;
  auto rng = make_rng(seed, kNoiseStream);
  std::normal_distribution<double> gauss(0.0, noise_std);
  for (Index i = 0; i < y.size(); ++i) y[i] += gauss(rng);
}

}  // namespace

Dataset::Dataset(Matrix x, Vector y, std::string name, std::vector<std::string> names)
    : features(std::move(x)), targets(std::move(y)), name(std::move(name)),
      feature_names(std::move(names)) {
  validate();
}

void Dataset::validate() const {
  if (features.rows() != targets.size()) {
    throw std::invalid_argument("dataset: feature rows (" + std::to_string(features.rows()) +
                                ") != target count (" + std::to_string(targets.size()) + ")");
  }
  if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != features.cols()) {
    throw std::invalid_argument("dataset: feature name count does not match columns");
  }
  if (!features.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("dataset: non-finite value");
  }
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.name = name;
  out.feature_names = feature_names;
  out.features.resize(static_cast<Index>(rows.size()), features.cols());
  out.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    if (r < 0 || r >= this->rows()) throw std::out_of_range("dataset subset: row index");
    out.features.row(static_cast<Index>(k)) = features.row(r);
    out.targets[static_cast<Index>(k)] = targets[r];
  }
  return out;
}

double test_function(double x1, double x2) {
  return x1 * x1 * x1 + x1 * x1 - x1 - 1.0 + x1 * x2 + std::sin(x2);
}

double rcl_current(double v0, double omega, double t, double r, double l, double c) {
  const double reactance = omega * l - 1.0 / (omega * c);
  return v0 * std::cos(omega * t) / std::sqrt(r * r + reactance * reactance);
}

// Second branch is R3/(R2+R3) as published, not the textbook R3/(R3+R4).
double wheatstone_voltage(double u, double r1, double r2, double r3) {
  return u * (r2 / (r1 + r2) - r3 / (r2 + r3));
}

Dataset generate_test_function(Index n, std::uint64_t seed, double noise_std,
                               const TestFunctionDomain& domain) {
  require_rows(n, "generate_test_function");
  require_ordered(domain.x1, "x1");
  require_ordered(domain.x2, "x2");
  auto rng = make_rng(seed, kSampleStream);
  Matrix x(n, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = draw(rng, domain.x1);
    x(i, 1) = draw(rng, domain.x2);
    y[i] = test_function(x(i, 0), x(i, 1));
  }
  add_noise(y, seed, noise_std);
  return Dataset(std::move(x), std::move(y), "TF", {"x1", "x2"});
}

Dataset generate_rcl(Index n, std::uint64_t seed, double noise_std, const RclDomain& domain) {
  require_rows(n, "generate_rcl");
  require_ordered(domain.v0, "V0");
  require_ordered(domain.t, "t");
  require_ordered(domain.l, "L");
  require_positive(domain.omega, "omega");
  require_positive(domain.r, "R");
  require_positive(domain.c, "C");
  auto rng = make_rng(seed, kSampleStream);
  Matrix x(n, 6);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double v0 = draw(rng, domain.v0);
    const double omega = draw(rng, domain.omega);
    const double t = draw(rng, domain.t);
    const double r = draw(rng, domain.r);
    const double l = draw(rng, domain.l);
    const double c = draw(rng, domain.c);
    x.row(i) << v0, omega, t, r, l, c;
    y[i] = rcl_current(v0, omega, t, r, l, c);
  }
  add_noise(y, seed, noise_std);
  return Dataset(std::move(x), std::move(y), "RCL", {"V0", "omega", "t", "R", "L", "C"});
}

Dataset generate_wheatstone(Index n, std::uint64_t seed, double noise_std,
                            const WheatstoneDomain& domain) {
  require_rows(n, "generate_wheatstone");
  require_ordered(domain.u, "U");
  require_positive(domain.r1, "R1");
  require_positive(domain.r2, "R2");
  require_positive(domain.r3, "R3");
  auto rng = make_rng(seed, kSampleStream);
  Matrix x(n, 4);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double u = draw(rng, domain.u);
    const double r1 = draw(rng, domain.r1);
    const double r2 = draw(rng, domain.r2);
    const double r3 = draw(rng, domain.r3);
    x.row(i) << u, r1, r2, r3;
    y[i] = wheatstone_voltage(u, r1, r2, r3);
  }
  add_noise(y, seed, noise_std);
  return Dataset(std::move(x), std::move(y), "WSB", {"U", "R1", "R2", "R3"});
}

bool is_synthetic_key(const std::string& key) {
  return key == "TF" || key == "RCL" || key == "WSB";
}

Dataset generate_synthetic(const std::string& key, Index n, std::uint64_t seed) {
  if (key == "TF") return generate_test_function(n ? n : 1000, seed, 0.0);
  if (key == "RCL") return generate_rcl(n ? n : 4000, seed, 0.1);
  if (key == "WSB") return generate_wheatstone(n ? n : 200, seed, 0.1);
  throw std::invalid_argument("unknown synthetic dataset key: " + key);
}

Dataset generate_synthetic(const std::string& key, Index n, std::uint64_t seed, double noise_std) {
  if (key == "TF") return generate_test_function(n ? n : 1000, seed, noise_std);
  if (key == "RCL") return generate_rcl(n ? n : 4000, seed, noise_std);
  if (key == "WSB") return generate_wheatstone(n ? n : 200, seed, noise_std);
  throw std::invalid_argument("unknown synthetic dataset key: " + key);
}

// ---------------------------------------------------------------------------

void SplitSpec::validate(Index n) const {
  if (const auto* f = std::get_if<SplitFractions>(&mode)) {
    if (f->train < 0.0 || f->validation < 0.0 || f->test < 0.0) {
      throw std::invalid_argument("split fractions must be nonnegative");
    }
    if (std::abs(f->train + f->validation + f->test - 1.0) > 1e-9) {
      throw std::invalid_argument("split fractions must sum to 1");
    }
  } else {
    const auto& c = std::get<SplitCounts>(mode);
    if (c.train < 0 || c.test < 0) throw std::invalid_argument("split counts must be >= 0");
    if (c.train + c.test > n) {
      throw std::invalid_argument("split counts (" + std::to_string(c.train) + " + " +
                                  std::to_string(c.test) + ") exceed dataset size " +
                                  std::to_string(n));
    }
  }
}

SplitIndices split_indices(Index n, const SplitSpec& spec) {
  spec.validate(n);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  auto rng = make_rng(spec.seed, kSplitStream);
  std::shuffle(perm.begin(), perm.end(), rng);

  Index n_train = 0, n_val = 0, n_test = 0;
  if (const auto* f = std::get_if<SplitFractions>(&spec.mode)) {
    n_train = static_cast<Index>(std::llround(f->train * static_cast<double>(n)));
    n_val = static_cast<Index>(std::llround(f->validation * static_cast<double>(n)));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    n_test = n - n_train - n_val;
  } else {
    const auto& c = std::get<SplitCounts>(spec.mode);
    n_train = c.train;
    n_test = c.test;
  }

  SplitIndices out;
  auto it = perm.begin();
  out.train.assign(it, it + n_train);
  it += n_train;
  out.validation.assign(it, it + n_val);
  it += n_val;
  out.test.assign(it, it + n_test);
  return out;
}

Split split(const Dataset& d, const SplitSpec& spec) {
  Split s;
  s.indices = split_indices(d.rows(), spec);
  s.train = d.subset(s.indices.train);
  s.validation = d.subset(s.indices.validation);
  s.test = d.subset(s.indices.test);
  return s;
}

// ---------------------------------------------------------------------------

Matrix Scaler::transform(const Matrix& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("scaler: feature width mismatch");
  Matrix z = x.rowwise() - mean.transpose();
  z.array().rowwise() /= stddev.transpose().array();
  return z;
}

Matrix Scaler::inverse_transform(const Matrix& z) const {
  if (z.cols() != mean.size()) throw std::invalid_argument("scaler: feature width mismatch");
  Matrix x = z.array().rowwise() * stddev.transpose().array();
  x.rowwise() += mean.transpose();
  return x;
}

Vector Scaler::transform_row(const Vector& x) const {
  if (x.size() != mean.size()) throw std::invalid_argument("scaler: feature width mismatch");
  return ((x - mean).array() / stddev.array()).matrix();
}

namespace {

double population_std(const Eigen::Ref<const Vector>& v, double mean) {
  const double var = (v.array() - mean).square().mean();
  const double sd = std::sqrt(var);
  return sd > 0.0 ? sd : 1.0;
}

}  // namespace

Scaler fit_scaler(const Dataset& train, bool with_targets) {
  if (train.empty()) throw std::invalid_argument("fit_scaler: empty dataset");
  Scaler s;
  s.mean = train.features.colwise().mean().transpose();
  s.stddev.resize(train.feature_count());
  for (Index j = 0; j < train.feature_count(); ++j) {
    s.stddev[j] = population_std(train.features.col(j), s.mean[j]);
  }
  if (with_targets) {
    s.target_mean = train.targets.mean();
    s.target_stddev = population_std(train.targets, *s.target_mean);
  }
  return s;
}

Dataset apply_scaler(const Scaler& s, const Dataset& d) {
  Dataset out = d;
  out.features = s.transform(d.features);
  if (s.target_mean) {
    out.targets = (d.targets.array() - *s.target_mean) / *s.target_stddev;
  }
  return out;
}

Dataset invert_scaler(const Scaler& s, const Dataset& d) {
  Dataset out = d;
  out.features = s.inverse_transform(d.features);
  if (s.target_mean) {
    out.targets = d.targets.array() * *s.target_stddev + *s.target_mean;
  }
  return out;
}

}  // namespace twinreg
