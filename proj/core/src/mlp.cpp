#include "twinreg/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "twinreg/random.hpp"

namespace twinreg {

MlpNetwork::MlpNetwork(Index input_width, std::vector<Index> hidden, Activation activation)
    : activation_(activation) {
  if (input_width < 1) throw std::invalid_argument("mlp: input width must be >= 1");
  widths_.push_back(input_width);
  for (Index h : hidden) {
    if (h < 1) throw std::invalid_argument("mlp: hidden widths must be >= 1");
    widths_.push_back(h);
  }
  widths_.push_back(1);
  std::size_t offset = 0;
  for (Index l = 0; l < layer_count(); ++l) {
    offsets_.push_back(offset);
    const auto in = static_cast<std::size_t>(widths_[static_cast<std::size_t>(l)]);
    const auto out = static_cast<std::size_t>(widths_[static_cast<std::size_t>(l) + 1]);
    offset += in * out + out;
  }
  params_ = Vector::Zero(static_cast<Index>(offset));
}

Eigen::Map<const Matrix> MlpNetwork::weight(Index l) const {
  const auto in = widths_[static_cast<std::size_t>(l)];
  const auto out = widths_[static_cast<std::size_t>(l) + 1];
  return {params_.data() + weight_offset(l), out, in};
}

Eigen::Map<const Vector> MlpNetwork::bias(Index l) const {
  const auto in = widths_[static_cast<std::size_t>(l)];
  const auto out = widths_[static_cast<std::size_t>(l) + 1];
  return {params_.data() + weight_offset(l) + static_cast<std::size_t>(in * out), out};
}

Eigen::Map<Matrix> MlpNetwork::weight(Index l) {
  const auto in = widths_[static_cast<std::size_t>(l)];
  const auto out = widths_[static_cast<std::size_t>(l) + 1];
  return {params_.data() + weight_offset(l), out, in};
}

Eigen::Map<Vector> MlpNetwork::bias(Index l) {
  const auto in = widths_[static_cast<std::size_t>(l)];
  const auto out = widths_[static_cast<std::size_t>(l) + 1];
  return {params_.data() + weight_offset(l) + static_cast<std::size_t>(in * out), out};
}

void MlpNetwork::initialize(std::uint64_t seed) {
  auto rng = make_rng(seed, 21);
  for (Index l = 0; l < layer_count(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(widths_[static_cast<std::size_t>(l)]));
    std::uniform_real_distribution<double> u(-limit, limit);
    auto w = weight(l);
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    bias(l).setZero();
  }
}

namespace {

struct Workspace {
  std::vector<Matrix> z;  // pre-activations per layer
  std::vector<Matrix> a;  // activations; a[0] is the input batch
  Matrix delta;
  Matrix delta_prev;
};

void apply_activation(Activation act, const Matrix& z, Matrix& a) {
  if (act == Activation::relu) {
    a = z.cwiseMax(0.0);
  } else {
    a = z.array().tanh().matrix();
  }
}

void activation_backward(Activation act, const Matrix& z, const Matrix& a, Matrix& delta) {
  if (act == Activation::relu) {
    delta = (z.array() > 0.0).select(delta, 0.0);
  } else {
    delta.array() *= 1.0 - a.array().square();
  }
}

// Forward pass storing intermediates. ws.a[0] must hold the input batch.
void forward_store(const MlpNetwork& net, Workspace& ws) {
  const Index layers = net.layer_count();
  ws.z.resize(static_cast<std::size_t>(layers) + 1);
  ws.a.resize(static_cast<std::size_t>(layers) + 1);
  for (Index l = 0; l < layers; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    auto& z = ws.z[ul + 1];
    z.noalias() = net.weight(l) * ws.a[ul];
    z.colwise() += net.bias(l);
    if (l + 1 < layers) {
      apply_activation(net.activation(), z, ws.a[ul + 1]);
    } else {
      ws.a[ul + 1] = z;
    }
  }
}

double backprop(const MlpNetwork& net, Workspace& ws, const Eigen::RowVectorXd& targets,
                Vector& gradient) {
  forward_store(net, ws);
  const Index layers = net.layer_count();
  const Index batch = ws.a[0].cols();
  const auto& out = ws.a[static_cast<std::size_t>(layers)];
  const Eigen::RowVectorXd residual = out.row(0) - targets;
  const double loss = residual.squaredNorm() / static_cast<double>(batch);

  gradient.resize(net.parameters().size());
  ws.delta = (2.0 / static_cast<double>(batch)) * residual;
  std::size_t offset = static_cast<std::size_t>(gradient.size());
  for (Index l = layers - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    const Index in = net.widths()[ul];
    const Index outw = net.widths()[ul + 1];
    offset -= static_cast<std::size_t>(in * outw + outw);
    Eigen::Map<Matrix> gw(gradient.data() + offset, outw, in);
    Eigen::Map<Vector> gb(gradient.data() + offset + static_cast<std::size_t>(in * outw), outw);
    gw.noalias() = ws.delta * ws.a[ul].transpose();
    gb = ws.delta.rowwise().sum();
    if (l > 0) {
      ws.delta_prev.noalias() = net.weight(l).transpose() * ws.delta;
      activation_backward(net.activation(), ws.z[ul], ws.a[ul], ws.delta_prev);
      std::swap(ws.delta, ws.delta_prev);
    }
  }
  return loss;
}

constexpr Index kPredictChunk = 8192;

}  // namespace

Eigen::RowVectorXd MlpNetwork::forward(const Matrix& inputs_t) const {
  if (inputs_t.rows() != input_width()) throw std::invalid_argument("mlp: input width mismatch");
  Eigen::RowVectorXd out(inputs_t.cols());
  Workspace ws;
  for (Index start = 0; start < inputs_t.cols(); start += kPredictChunk) {
    const Index len = std::min(kPredictChunk, inputs_t.cols() - start);
    ws.a.resize(1);
    ws.a[0] = inputs_t.middleCols(start, len);
    forward_store(*this, ws);
    out.segment(start, len) = ws.a.back().row(0);
  }
  return out;
}

double MlpNetwork::loss_and_gradient(const Matrix& inputs_t, const Eigen::RowVectorXd& targets,
                                     Vector& gradient) const {
  if (inputs_t.rows() != input_width() || inputs_t.cols() != targets.size()) {
    throw std::invalid_argument("mlp: batch shape mismatch");
  }
  Workspace ws;
  ws.a.resize(1);
  ws.a[0] = inputs_t;
  return backprop(*this, ws, targets, gradient);
}

// ---------------------------------------------------------------------------

MlpModel::MlpModel(MlpNetwork net, double target_mean, double target_scale, TrainingHistory history)
    : net_(std::move(net)), target_mean_(target_mean), target_scale_(target_scale),
      history_(std::move(history)) {}

Vector MlpModel::predict_unchecked(const Matrix& x) const {
  Vector out(x.rows());
  for (Index start = 0; start < x.rows(); start += kPredictChunk) {
    const Index len = std::min(kPredictChunk, x.rows() - start);
    const Matrix xt = x.middleRows(start, len).transpose();
    out.segment(start, len) = net_.forward(xt).transpose();
  }
  out = out.array() * target_scale_ + target_mean_;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class Optimizer {
 public:
  Optimizer(const MlpConfig& cfg, Index size)
      : cfg_(cfg), s1_(Vector::Zero(size)), s2_(Vector::Zero(size)) {}

  void step(Vector& params, const Vector& grad, double lr) {
    step_moments(params, grad, lr);
    // Moments of dead units decay geometrically into subnormals, which are very slow.
    flush_tiny(s1_);
    flush_tiny(s2_);
  }

 private:
  static void flush_tiny(Vector& v) { v = (v.array().abs() < 1e-150).select(0.0, v); }

  void step_moments(Vector& params, const Vector& grad, double lr) {
    if (cfg_.optimizer == OptimizerKind::adadelta) {
      // s1: running E[g^2], s2: running E[dx^2]
      s1_.array() = cfg_.rho * s1_.array() + (1.0 - cfg_.rho) * grad.array().square();
      update_ = -((s2_.array() + cfg_.epsilon).sqrt() / (s1_.array() + cfg_.epsilon).sqrt()) *
                grad.array();
      s2_.array() = cfg_.rho * s2_.array() + (1.0 - cfg_.rho) * update_.array().square();
      params.noalias() += lr * update_;
    } else {
      ++t_;
      s1_.array() = cfg_.beta1 * s1_.array() + (1.0 - cfg_.beta1) * grad.array();
      s2_.array() = cfg_.beta2 * s2_.array() + (1.0 - cfg_.beta2) * grad.array().square();
      const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      params.array() -= lr * (s1_.array() / c1) / ((s2_.array() / c2).sqrt() + cfg_.epsilon);
    }
  }

  const MlpConfig& cfg_;
  Vector s1_, s2_, update_;
  long t_ = 0;
};

double rmse_rows(const MlpNetwork& net, const Matrix& xt, const Eigen::RowVectorXd& y) {
  const Eigen::RowVectorXd pred = net.forward(xt);
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

}  // namespace

std::shared_ptr<const MlpModel> train_mlp(const MlpConfig& config, const Matrix& features,
                                          const Vector& targets,
                                          const std::optional<ValidationData>& validation,
                                          std::uint64_t seed) {
  config.validate();
  if (features.rows() < 1) throw std::invalid_argument("mlp fit: no training rows");
  if (features.rows() != targets.size()) throw std::invalid_argument("mlp fit: row/target mismatch");
  if (!features.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("mlp fit: non-finite input");
  }

  auto rng = make_rng(seed, 22);

  // Training/validation rows in sample-per-column layout.
  Matrix xt;
  Vector y;
  Matrix val_xt;
  Vector val_y;
  if (validation) {
    if (validation->features.cols() != features.cols() ||
        validation->features.rows() != validation->targets.size()) {
      throw std::invalid_argument("mlp fit: validation shape mismatch");
    }
    xt = features.transpose();
    y = targets;
    val_xt = validation->features.transpose();
    val_y = validation->targets;
  } else if (features.rows() >= 2) {
    const Index n = features.rows();
    const Index n_val = std::clamp<Index>(
        static_cast<Index>(std::llround(config.validation_fraction * static_cast<double>(n))), 1, n - 1);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    val_xt.resize(features.cols(), n_val);
    val_y.resize(n_val);
    xt.resize(features.cols(), n - n_val);
    y.resize(n - n_val);
    for (Index k = 0; k < n; ++k) {
      const Index r = perm[static_cast<std::size_t>(k)];
      if (k < n_val) {
        val_xt.col(k) = features.row(r).transpose();
        val_y[k] = targets[r];
      } else {
        xt.col(k - n_val) = features.row(r).transpose();
        y[k - n_val] = targets[r];
      }
    }
  } else {
    xt = features.transpose();
    y = targets;
  }

  double t_mean = 0.0;
  double t_scale = 1.0;
  if (config.standardize_targets) {
    t_mean = y.mean();
    const double sd = std::sqrt((y.array() - t_mean).square().mean());
    t_scale = sd > 0.0 ? sd : 1.0;
  }
  const Eigen::RowVectorXd ys = ((y.array() - t_mean) / t_scale).matrix().transpose();
  const Eigen::RowVectorXd val_ys = ((val_y.array() - t_mean) / t_scale).matrix().transpose();
  const bool has_val = val_y.size() > 0;

  MlpNetwork net(features.cols(), config.hidden, config.activation);
  net.initialize(seed);

  Optimizer opt(config, net.parameters().size());
  TrainingHistory history;
  Vector best_params = net.parameters();
  double best_score = std::numeric_limits<double>::infinity();
  double reference = std::numeric_limits<double>::infinity();
  Index since_best = 0;
  Index since_plateau = 0;
  double lr = config.learning_rate;

  const Index n = xt.cols();
  const Index batch = std::min(config.batch_size, n);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Workspace ws;
  ws.a.resize(1);
  Eigen::RowVectorXd yb;
  Vector grad;

  Index steps = 0;
  bool budget_spent = false;
  for (Index epoch = 0; epoch < config.max_epochs && !budget_spent; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    Index seen = 0;
    for (Index start = 0; start < n && !budget_spent; start += batch) {
      const Index len = std::min(batch, n - start);
      ws.a.resize(1);
      ws.a[0].resize(xt.rows(), len);
      yb.resize(len);
      for (Index k = 0; k < len; ++k) {
        const Index r = order[static_cast<std::size_t>(start + k)];
        ws.a[0].col(k) = xt.col(r);
        yb[k] = ys[r];
      }
      loss_sum += backprop(net, ws, yb, grad) * static_cast<double>(len);
      opt.step(net.parameters(), grad, lr);
      seen += len;
      budget_spent = config.max_steps > 0 && ++steps >= config.max_steps;
    }
    const double train_loss = loss_sum / static_cast<double>(seen);
    const double score = has_val ? rmse_rows(net, val_xt, val_ys) : std::sqrt(train_loss);
    history.train_loss.push_back(train_loss);
    history.validation_rmse.push_back(score);
    history.learning_rate.push_back(lr);
    if (!std::isfinite(score)) break;

    if (score < best_score) {
      best_score = score;
      best_params = net.parameters();
      history.best_epoch = epoch;
    }
    if (score < reference * (1.0 - config.min_relative_improvement)) {
      reference = score;
      since_best = 0;
      since_plateau = 0;
    } else {
      ++since_best;
      ++since_plateau;
      if (since_plateau >= config.plateau_patience) {
        lr = std::max(lr * config.lr_factor, config.min_learning_rate);
        since_plateau = 0;
      }
      if (since_best >= config.early_stop_patience) {
        history.early_stopped = true;
        break;
      }
    }
  }

  net.parameters() = best_params;
  return std::make_shared<const MlpModel>(std::move(net), t_mean, t_scale, std::move(history));
}

}  // namespace twinreg
