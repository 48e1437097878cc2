#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "twinreg/cross_validation.hpp"
#include "twinreg/forest.hpp"
#include "twinreg/knn.hpp"
#include "twinreg/metrics.hpp"
#include "twinreg/mlp.hpp"
#include "twinreg/random.hpp"

using namespace twinreg;
using twinreg::testing::layer_sum;

namespace {

Matrix uniform_matrix(Index rows, Index cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  auto rng = make_rng(seed, 7);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix x(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) x(i, j) = u(rng);
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// k-NN

TEST(Knn, NearestLabel) {
  Matrix x(2, 1);
  x << 0, 10;
  const KnnModel m(x, (Vector(2) << 5, 7).finished(), 1);
  EXPECT_EQ(m.predict((Matrix(1, 1) << 1).finished())[0], 5.0);
}

TEST(Knn, MeanOfNeighbours) {
  Matrix x(4, 1);
  x << 0, 1, 2, 50;
  const KnnModel m(x, (Vector(4) << 1, 2, 3, 100).finished(), 3);
  EXPECT_DOUBLE_EQ(m.predict((Matrix(1, 1) << 1).finished())[0], 2.0);
}

TEST(Knn, KEqualsNIsGlobalMean) {
  const Matrix x = uniform_matrix(30, 3, 1);
  const Vector y = uniform_matrix(30, 1, 2).col(0);
  const KnnModel m(x, y, 30);
  const Vector p = m.predict(uniform_matrix(10, 3, 3));
  for (Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], y.mean(), 1e-12);
}

TEST(Knn, RangeAndWidthChecks) {
  const Matrix x = uniform_matrix(5, 2, 1);
  EXPECT_THROW(KnnModel(x, Vector::Zero(5), 0), std::invalid_argument);
  EXPECT_THROW(KnnModel(x, Vector::Zero(5), 6), std::invalid_argument);
  const KnnModel m(x, Vector::Zero(5), 2);
  EXPECT_THROW(m.predict(Matrix::Zero(1, 3)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Random forest

TEST(Forest, ConstantTargetsStump) {
  ForestParams p;
  p.n_estimators = 5;
  p.max_depth = 1;
  const Matrix x = uniform_matrix(3, 2, 4);
  const auto m = train_forest(p, x, Vector::Constant(3, 3.0), 1);
  const Vector pred = m->predict(uniform_matrix(20, 2, 5));
  for (Index i = 0; i < pred.size(); ++i) EXPECT_EQ(pred[i], 3.0);
}

TEST(Forest, PredictionIsTreeMean) {
  ForestParams p;
  p.n_estimators = 17;
  p.max_features = 0.5;
  const Matrix x = uniform_matrix(80, 4, 6);
  const Vector y = (x.col(0).array().square() + x.col(1).array()).matrix();
  const auto m = train_forest(p, x, y, 9);
  const Matrix q = uniform_matrix(25, 4, 7);
  const Matrix per_tree = m->predict_per_tree(q);
  ASSERT_EQ(per_tree.cols(), 17);
  EXPECT_LT((m->predict(q) - per_tree.rowwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
  // Reversed tree order gives the same mean.
  Vector rev = Vector::Zero(q.rows());
  for (Index t = per_tree.cols() - 1; t >= 0; --t) rev += per_tree.col(t);
  EXPECT_LT((rev / 17.0 - m->predict(q)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forest, DeterministicPerSeed) {
  ForestParams p;
  p.n_estimators = 10;
  const Matrix x = uniform_matrix(60, 3, 8);
  const Vector y = x.col(2);
  const auto a = train_forest(p, x, y, 4);
  const auto b = train_forest(p, x, y, 4);
  const Matrix q = uniform_matrix(10, 3, 9);
  EXPECT_TRUE(a->predict(q) == b->predict(q));
  EXPECT_EQ(a->parameter_count(), b->parameter_count());
}

TEST(Forest, DepthLimitRespected) {
  ForestParams p;
  p.n_estimators = 3;
  p.max_depth = 2;
  const Matrix x = uniform_matrix(100, 2, 10);
  const auto m = train_forest(p, x, x.col(0), 1);
  for (const auto& t : m->trees()) {
    EXPECT_LE(t.depth(), 2);
    EXPECT_LE(t.leaf_count(), 4);
  }
}

TEST(Fit, RejectsEmptyAndNonFinite) {
  const auto cfg = LearnerConfig::make_forest();
  EXPECT_THROW(fit(cfg, Matrix(0, 2), Vector(0), std::nullopt, 0), std::invalid_argument);
  Matrix x = Matrix::Zero(3, 1);
  x(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit(cfg, x, Vector::Zero(3), std::nullopt, 0), std::invalid_argument);
  EXPECT_THROW(fit(LearnerConfig::make_mlp(), x, Vector::Zero(3), std::nullopt, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Grid search

TEST(Grid, DefaultGridCardinality) {
  EXPECT_EQ(ForestGrid{}.cardinality(), 405u);
  EXPECT_EQ(ForestGrid{}.candidates().size(), 405u);
  // max_depth is the outermost axis, n_estimators the innermost.
  const auto c = ForestGrid{}.candidates();
  EXPECT_EQ(c[0].n_estimators, 100);
  EXPECT_EQ(c[1].n_estimators, 300);
  EXPECT_EQ(c[0].max_depth, 4);
  EXPECT_EQ(c[81].max_depth, 8);
}

TEST(Grid, InvalidGridsRejected) {
  ForestGrid g;
  g.cv_folds = 1;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = {};
  g.max_depth.clear();
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = {};
  g.max_features = {0.0};
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(Grid, SingleCandidateSelected) {
  ForestGrid g;
  g.max_depth = {6};
  g.max_features = {0.667};
  g.min_samples_leaf = {2};
  g.min_samples_split = {4};
  g.n_estimators = {5};
  const Matrix x = uniform_matrix(40, 3, 11);
  const auto res = grid_search_cv(LearnerConfig::make_forest({}, g), x, x.col(1), 3);
  EXPECT_EQ(res.selection.best, g.candidates().front());
  EXPECT_EQ(res.selection.scores.size(), 1u);
  EXPECT_EQ(std::static_pointer_cast<const ForestModel>(res.model)->params(), g.candidates().front());
}

TEST(Grid, StepFunctionPicksSmallestDepth) {
  const Matrix x = uniform_matrix(120, 2, 12);
  Vector y(120);
  for (Index i = 0; i < 120; ++i) y[i] = x(i, 0) > 0.2 ? 1.0 : 0.0;
  ForestGrid g;
  g.max_depth = {4, 8, 16};
  g.max_features = {1.0};
  g.min_samples_leaf = {1};
  g.min_samples_split = {2};
  g.n_estimators = {10};
  const auto res = grid_search_cv(LearnerConfig::make_forest({}, g), x, y, 5);
  ASSERT_EQ(res.selection.scores.size(), 3u);
  const double best = res.selection.best_rmse;
  Index smallest_optimal = -1;
  for (const auto& s : res.selection.scores) {
    if (s.mean_rmse == best) {
      smallest_optimal = s.params.max_depth;
      break;
    }
  }
  EXPECT_EQ(res.selection.best.max_depth, smallest_optimal);
  EXPECT_EQ(res.selection.best.max_depth, 4);
}

TEST(Grid, TooFewRowsRejected) {
  const Matrix x = uniform_matrix(4, 1, 13);
  ForestGrid g;
  g.max_depth = {2};
  g.max_features = {1.0};
  g.min_samples_leaf = {1};
  g.min_samples_split = {2};
  g.n_estimators = {2};
  EXPECT_THROW(grid_search_cv(LearnerConfig::make_forest({}, g), x, x.col(0), 1), std::invalid_argument);
}

TEST(Folds, ContiguousBlocksOfPermutation) {
  const auto folds = make_folds(23, 5, 7);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen(23, 0);
  for (const auto& f : folds) {
    EXPECT_TRUE(f.size() == 4u || f.size() == 5u);
    for (Index i : f) ++seen[static_cast<std::size_t>(i)];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(make_folds(23, 5, 7), folds);
}

// ---------------------------------------------------------------------------
// MLP

TEST(CountParameters, LayerSumOracle) {
  EXPECT_EQ(count_parameters(MlpRole::plain, 13, {128, 128}), layer_sum({13, 128, 128, 1}));
  EXPECT_EQ(count_parameters(MlpRole::plain, 13, {128, 128}), 18433u);
  EXPECT_EQ(count_parameters(MlpRole::twin, 13, {128, 128}), layer_sum({26, 128, 128, 1}));
  EXPECT_EQ(count_parameters(MlpRole::twin, 13, {128, 128}), 20097u);
  EXPECT_EQ(count_parameters(MlpRole::twin, 13, {128, 128}, true), layer_sum({39, 128, 128, 1}));
  EXPECT_EQ(count_parameters(MlpRole::plain, 4, {}), 5u);
  EXPECT_THROW(count_parameters(MlpRole::plain, 0, {}), std::invalid_argument);
}

TEST(Mlp, ParameterCountMatchesArchitecture) {
  const MlpNetwork net(7, {16, 8}, Activation::relu);
  EXPECT_EQ(static_cast<std::size_t>(net.parameters().size()), layer_sum({7, 16, 8, 1}));
}

TEST(Mlp, ZeroWeightsOutputBias) {
  MlpNetwork net(3, {4, 4}, Activation::relu);
  net.parameters().setZero();
  net.bias(net.layer_count() - 1)[0] = 2.5;
  const MlpModel model(net, 0.0, 1.0);
  const Vector p = model.predict(uniform_matrix(6, 3, 14));
  for (Index i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], 2.5);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  auto rng = make_rng(123, 0);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<Index> width(1, 6);
    const Index in = width(rng);
    std::vector<Index> hidden{width(rng), width(rng)};
    MlpNetwork net(in, hidden, trial % 2 ? Activation::tanh : Activation::relu);
    net.initialize(static_cast<std::uint64_t>(trial));
    std::normal_distribution<double> g(0.0, 0.3);
    for (Index i = 0; i < net.parameters().size(); ++i) net.parameters()[i] += g(rng);
    const Matrix xt = uniform_matrix(in, 5, 100 + static_cast<std::uint64_t>(trial)).eval();
    const Eigen::RowVectorXd y = uniform_matrix(1, 5, 200 + static_cast<std::uint64_t>(trial)).row(0);
    Vector grad;
    net.loss_and_gradient(xt, y, grad);
    Vector numeric(grad.size());
    Vector scratch;
    const double h = 1e-5;
    for (Index k = 0; k < grad.size(); ++k) {
      MlpNetwork plus = net, minus = net;
      plus.parameters()[k] += h;
      minus.parameters()[k] -= h;
      numeric[k] = (plus.loss_and_gradient(xt, y, scratch) - minus.loss_and_gradient(xt, y, scratch)) / (2 * h);
    }
    const double rel = (grad - numeric).norm() / std::max({grad.norm(), numeric.norm(), 1e-12});
    EXPECT_LT(rel, 1e-4) << "trial " << trial;
  }
}

TEST(Mlp, FitsLinearFunction) {
  const Matrix x = uniform_matrix(200, 1, 15);
  const Vector y = (2.0 * x.col(0).array() + 1.0).matrix();
  MlpConfig c;
  c.hidden = {32, 32};
  c.max_epochs = 300;
  const auto m = train_mlp(c, x, y, std::nullopt, 3);
  const Matrix xt = uniform_matrix(100, 1, 16);
  const Vector yt = (2.0 * xt.col(0).array() + 1.0).matrix();
  EXPECT_LT(rmse(m->predict(xt), yt), 0.05);
}

TEST(Mlp, RestoresBestValidationWeights) {
  const Matrix x = uniform_matrix(120, 2, 17);
  const Vector y = (x.col(0).array().sin() + x.col(1).array().square()).matrix();
  const Matrix xv = uniform_matrix(40, 2, 18);
  const Vector yv = (xv.col(0).array().sin() + xv.col(1).array().square()).matrix();
  MlpConfig c;
  c.hidden = {16};
  c.max_epochs = 60;
  c.early_stop_patience = 10;
  c.plateau_patience = 4;
  const auto m = train_mlp(c, x, y, ValidationData{xv, yv}, 5);
  const auto& h = m->history();
  ASSERT_FALSE(h.validation_rmse.empty());
  const double best = *std::min_element(h.validation_rmse.begin(), h.validation_rmse.end());
  EXPECT_NEAR(rmse(m->predict(xv), yv) / m->target_scale(), best, 1e-9);
  for (std::size_t e = 1; e < h.learning_rate.size(); ++e) EXPECT_LE(h.learning_rate[e], h.learning_rate[e - 1]);
  EXPECT_EQ(h.validation_rmse[static_cast<std::size_t>(h.best_epoch)], best);
}

TEST(Mlp, StepBudgetStopsTraining) {
  const Matrix x = uniform_matrix(64, 2, 19);
  MlpConfig c;
  c.hidden = {4};
  c.batch_size = 8;
  c.max_epochs = 100;
  c.max_steps = 12;  // 58 rows after the 10% hold-out: 8 updates per epoch
  const auto m = train_mlp(c, x, x.col(0), std::nullopt, 1);
  EXPECT_EQ(m->history().train_loss.size(), 2u);
}

TEST(Mlp, DeterministicPerSeed) {
  const Matrix x = uniform_matrix(50, 2, 20);
  MlpConfig c;
  c.hidden = {8};
  c.max_epochs = 5;
  const auto a = train_mlp(c, x, x.col(1), std::nullopt, 9);
  const auto b = train_mlp(c, x, x.col(1), std::nullopt, 9);
  EXPECT_TRUE(a->network().parameters() == b->network().parameters());
}

TEST(Mlp, WidthMismatchRejected) {
  const MlpModel m(MlpNetwork(3, {2}, Activation::relu), 0.0, 1.0);
  EXPECT_THROW(m.predict(Matrix::Zero(2, 4)), std::invalid_argument);
}
