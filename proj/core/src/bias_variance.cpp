#include "twinreg/bias_variance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/QR>

namespace twinreg {

Dataset BvTask::draw(Rng& rng) const {
  Dataset d;
  d.features = sample_inputs(rng);
  d.targets = truth(d.features);
  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    for (Index i = 0; i < d.targets.size(); ++i) d.targets[i] += noise(rng);
  }
  return d;
}

void BvConfig::validate() const {
  if (trials < 30) throw std::invalid_argument("bias-variance: trials must be >= 30");
  if (!(tolerance_se > 0.0)) throw std::invalid_argument("bias-variance: tolerance must be > 0");
}

nlohmann::json BvRecord::to_json() const {
  return {{"trials", trials}, {"mse", mse},     {"mse_se", mse_se}, {"bias2", bias2},
          {"var_a", var_a},   {"var_b", var_b}, {"var", var},       {"cov", cov},
          {"cov_se", cov_se}, {"noise_var", noise_var},             {"rhs", rhs},
          {"gap", gap},       {"degenerate", degenerate},           {"consistent", consistent},
          {"note", note}};
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

BvRecord bias_variance_diagnostic(const BvTask& task, const BvEstimator& member_a,
                                  const BvEstimator& member_b, const BvConfig& cfg) {
  cfg.validate();
  if (task.eval_points.rows() < 1) throw std::invalid_argument("bias-variance: no evaluation points");
  const Index trials = cfg.trials;
  const Index nx = task.eval_points.rows();
  const Vector f_true = task.truth(task.eval_points);

  Matrix pa(trials, nx);
  Matrix pb(trials, nx);
  std::vector<double> sq_err(static_cast<std::size_t>(trials));
  std::normal_distribution<double> noise(0.0, task.noise_std > 0.0 ? task.noise_std : 1.0);
  for (Index t = 0; t < trials; ++t) {
    const auto ts = static_cast<std::uint64_t>(t);
    auto data_rng = make_rng(cfg.seed, 10 * ts + 1);
    const Dataset d = task.draw(data_rng);
    pa.row(t) = member_a(d, task.eval_points, derive_seed(cfg.seed, 10 * ts + 2)).transpose();
    if (cfg.member_data == BvMemberData::independent) {
      auto rng_b = make_rng(cfg.seed, 10 * ts + 3);
      pb.row(t) = member_b(task.draw(rng_b), task.eval_points, derive_seed(cfg.seed, 10 * ts + 4)).transpose();
    } else {
      pb.row(t) = member_b(d, task.eval_points, derive_seed(cfg.seed, 10 * ts + 4)).transpose();
    }
    // Fresh test labels at the fixed evaluation points.
    auto test_rng = make_rng(cfg.seed, 10 * ts + 5);
    double se = 0.0;
    for (Index x = 0; x < nx; ++x) {
      const double y = f_true[x] + (task.noise_std > 0.0 ? noise(test_rng) : 0.0);
      const double r = 0.5 * (pa(t, x) + pb(t, x)) - y;
      se += r * r;
    }
    sq_err[static_cast<std::size_t>(t)] = se / static_cast<double>(nx);
  }

  BvRecord rec;
  rec.trials = trials;
  rec.mse = mean_of(sq_err);
  rec.mse_se = se_of(sq_err);
  rec.noise_var = task.noise_std * task.noise_std;

  const Eigen::RowVectorXd ma = pa.colwise().mean();
  const Eigen::RowVectorXd mb = pb.colwise().mean();
  const Matrix ca = pa.rowwise() - ma;
  const Matrix cb = pb.rowwise() - mb;
  const double inv_t = 1.0 / static_cast<double>(trials);
  double bias2 = 0.0, var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (Index x = 0; x < nx; ++x) {
    const double b = 0.5 * (ma[x] + mb[x]) - f_true[x];
    bias2 += b * b;
    var_a += ca.col(x).squaredNorm() * inv_t;
    var_b += cb.col(x).squaredNorm() * inv_t;
    cov += ca.col(x).dot(cb.col(x)) * inv_t;
  }
  const double inv_x = 1.0 / static_cast<double>(nx);
  rec.bias2 = bias2 * inv_x;
  rec.var_a = var_a * inv_x;
  rec.var_b = var_b * inv_x;
  rec.var = 0.5 * (rec.var_a + rec.var_b);
  rec.cov = cov * inv_x;
  std::vector<double> cov_terms(static_cast<std::size_t>(trials));
  for (Index t = 0; t < trials; ++t) {
    cov_terms[static_cast<std::size_t>(t)] = ca.row(t).dot(cb.row(t)) * inv_x;
  }
  rec.cov_se = se_of(cov_terms);
  rec.rhs = rec.bias2 + 0.5 * rec.var + 0.5 * rec.cov + rec.noise_var;
  rec.gap = rec.mse - rec.rhs;

  const double scale = std::max({1.0, std::abs(rec.mse), std::abs(rec.rhs)});
  if (rec.mse_se <= 1e-15 * scale) {
    rec.degenerate = true;
    rec.consistent = std::abs(rec.gap) <= 1e-12 * scale;
    rec.note = "zero Monte-Carlo variance; identity checked exactly";
  } else {
    rec.consistent = std::abs(rec.gap) <= cfg.tolerance_se * rec.mse_se;
  }
  return rec;
}

BvTask polynomial_task(Index n_train, double noise_std, Index n_eval) {
  if (n_train < 1 || n_eval < 1) throw std::invalid_argument("polynomial_task: sizes must be >= 1");
  BvTask task;
  task.truth = [](const Matrix& x) -> Vector {
    const Vector c = x.col(0);
    return c.array().cube() - c.array();
  };
  task.sample_inputs = [n_train](Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(n_train, 1);
    for (Index i = 0; i < n_train; ++i) x(i, 0) = u(rng);
    return x;
  };
  task.noise_std = noise_std;
  task.eval_points.resize(n_eval, 1);
  for (Index i = 0; i < n_eval; ++i) {
    task.eval_points(i, 0) = n_eval == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n_eval - 1);
  }
  return task;
}

namespace {

Matrix vandermonde(const Vector& x, Index degree) {
  Matrix v(x.size(), degree + 1);
  v.col(0).setOnes();
  for (Index p = 1; p <= degree; ++p) v.col(p) = v.col(p - 1).cwiseProduct(x);
  return v;
}

}  // namespace

BvEstimator polynomial_estimator(Index degree, bool bootstrap) {
  if (degree < 0) throw std::invalid_argument("polynomial_estimator: degree must be >= 0");
  return [degree, bootstrap](const Dataset& train, const Matrix& eval, std::uint64_t seed) -> Vector {
    Vector x = train.features.col(0);
    Vector y = train.targets;
    if (bootstrap) {
      auto rng = make_rng(seed, 61);
      std::uniform_int_distribution<Index> pick(0, train.rows() - 1);
      Vector bx(x.size());
      Vector by(y.size());
      for (Index i = 0; i < x.size(); ++i) {
        const Index j = pick(rng);
        bx[i] = x[j];
        by[i] = y[j];
      }
      x = std::move(bx);
      y = std::move(by);
    }
    const Vector coef = vandermonde(x, degree).colPivHouseholderQr().solve(y);
    return vandermonde(eval.col(0), degree) * coef;
  };
}

BvEstimator oracle_estimator(const BvTask& task) {
  return [truth = task.truth](const Dataset&, const Matrix& eval, std::uint64_t) { return truth(eval); };
}

}  // namespace twinreg
