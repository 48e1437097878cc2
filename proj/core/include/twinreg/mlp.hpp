#pragma once

#include <memory>
#include <optional>

#include "twinreg/learner.hpp"

namespace twinreg {

/// Fully connected network with a single linear output. All weights and biases
/// live in one flat vector, layer by layer: W_l (out x in, column-major), then b_l.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  MlpNetwork(Index input_width, std::vector<Index> hidden, Activation activation);

  Index input_width() const { return widths_.front(); }
  const std::vector<Index>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  Index layer_count() const { return static_cast<Index>(widths_.size()) - 1; }

  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  /// Uniform fan-in initialization: W ~ U(-sqrt(6/in), sqrt(6/in)), b = 0.
  void initialize(std::uint64_t seed);

  /// Batched forward pass; `inputs_t` holds one sample per column.
  Eigen::RowVectorXd forward(const Matrix& inputs_t) const;

  /// Mean squared error over the batch and its gradient w.r.t. parameters().
  double loss_and_gradient(const Matrix& inputs_t, const Eigen::RowVectorXd& targets,
                           Vector& gradient) const;

  Eigen::Map<const Matrix> weight(Index layer) const;
  Eigen::Map<const Vector> bias(Index layer) const;
  Eigen::Map<Matrix> weight(Index layer);
  Eigen::Map<Vector> bias(Index layer);

 private:
  std::size_t weight_offset(Index layer) const { return offsets_[static_cast<std::size_t>(layer)]; }

  std::vector<Index> widths_;  // input, hidden..., 1
  std::vector<std::size_t> offsets_;
  Activation activation_ = Activation::relu;
  Vector params_;
};

struct TrainingHistory {
  std::vector<double> train_loss;       // per epoch, standardized target units
  std::vector<double> validation_rmse;  // per epoch, standardized target units
  std::vector<double> learning_rate;
  Index best_epoch = -1;
  bool early_stopped = false;
};

class MlpModel final : public Model {
 public:
  MlpModel(MlpNetwork net, double target_mean, double target_scale, TrainingHistory history = {});

  LearnerKind kind() const override { return LearnerKind::mlp; }
  Index input_width() const override { return net_.input_width(); }
  std::size_t parameter_count() const override {
    return static_cast<std::size_t>(net_.parameters().size());
  }
  nlohmann::json to_json() const override;

  const MlpNetwork& network() const { return net_; }
  const TrainingHistory& history() const { return history_; }
  double target_mean() const { return target_mean_; }
  double target_scale() const { return target_scale_; }

 protected:
  Vector predict_unchecked(const Matrix& x) const override;

 private:
  MlpNetwork net_;
  double target_mean_;
  double target_scale_;
  TrainingHistory history_;
};

/// Mini-batch training with plateau learning-rate halving and early stopping on
/// validation RMSE; the best-validation weights are restored at the end.
std::shared_ptr<const MlpModel> train_mlp(const MlpConfig& config, const Matrix& features,
                                          const Vector& targets,
                                          const std::optional<ValidationData>& validation,
                                          std::uint64_t seed);

}  // namespace twinreg
