#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "twinreg/forest.hpp"
#include "twinreg/knn.hpp"
#include "twinreg/metrics.hpp"
#include "twinreg/twin.hpp"

using namespace twinreg;
using twinreg::testing::make_dataset;
using twinreg::testing::RowFunctionModel;

namespace {

Dataset random_dataset(Index n, Index f, std::uint64_t seed) {
  auto rng = make_rng(seed, 5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(n, f);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < f; ++c) x(i, c) = u(rng);
    y[i] = x(i, 0) * x(i, 0) + (f > 1 ? x(i, 1) : 0.0);
  }
  return make_dataset(x, y);
}

TwinModel zero_twin(const Dataset& anchors) {
  return make_twin_model(std::make_shared<ConstantModel>(2 * anchors.feature_count(), 0.0), anchors, false);
}

/// F(a, b) = g(a) - g(b): exactly antisymmetric and loop consistent.
ModelPtr difference_model(Index f, std::function<double(const Eigen::RowVectorXd&)> g) {
  return std::make_shared<RowFunctionModel>(2 * f, [f, g](const Eigen::RowVectorXd& r) {
    return g(r.head(f)) - g(r.tail(f));
  });
}

ForestParams small_forest() {
  ForestParams p;
  p.n_estimators = 8;
  return p;
}

}  // namespace

TEST(TwinPredict, ZeroModelAveragesAnchors) {
  Matrix x(3, 1);
  x << 0, 1, 2;
  const TwinModel tm = zero_twin(make_dataset(x, (Vector(3) << 1, 2, 3).finished()));
  Eigen::RowVectorXd q(1);
  q << 0.7;
  const TwinPrediction p = twin_predict(tm, q, AnchorPolicy::all());
  EXPECT_DOUBLE_EQ(p.value, 2.0);
  EXPECT_NEAR(p.uncertainty, std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_EQ(p.anchors, (std::vector<Index>{0, 1, 2}));
}

TEST(TwinPredict, SymmetrizedSingleAnchor) {
  Matrix a(1, 1);
  a << 3.0;
  Eigen::RowVectorXd q(1);
  q << -1.0;
  // F(q, a) = 1, F(a, q) = -1
  auto base = std::make_shared<RowFunctionModel>(2, [](const Eigen::RowVectorXd& r) { return r[0] < r[1] ? 1.0 : -1.0; });
  const TwinModel tm = make_twin_model(base, make_dataset(a, (Vector(1) << 5).finished()), false);
  EXPECT_DOUBLE_EQ(twin_predict(tm, q, AnchorPolicy::all()).value, 6.0);

  // F(q, a) = 0.5, F(a, q) = -0.3, y_a = 0
  auto base2 = std::make_shared<RowFunctionModel>(2, [](const Eigen::RowVectorXd& r) { return r[0] < r[1] ? 0.5 : -0.3; });
  const TwinModel tm2 = make_twin_model(base2, make_dataset(a, Vector::Zero(1)), false);
  EXPECT_DOUBLE_EQ(twin_predict(tm2, q, AnchorPolicy::all()).value, 0.4);
  EXPECT_DOUBLE_EQ(twin_predict(tm2, q, AnchorPolicy::all(false)).value, 0.5);
}

TEST(TwinPredict, ValueIsMeanOfPerAnchorValues) {
  const Dataset d = random_dataset(40, 2, 1);
  const TwinModel tm = twin_fit(LearnerConfig::make_forest(small_forest()), d, PairingStrategy::full(true),
                                std::nullopt, 3);
  const Dataset q = random_dataset(15, 2, 2);
  const auto preds = twin_predict_batch(tm, q.features, AnchorPolicy::all());
  const Vector values = twin_predict_values(tm, q.features, AnchorPolicy::all());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_NEAR(preds[i].value, preds[i].per_anchor_values.mean(), 1e-12);
    EXPECT_EQ(preds[i].value, values[static_cast<Index>(i)]);
    const auto single = twin_predict(tm, q.features.row(static_cast<Index>(i)), AnchorPolicy::all());
    EXPECT_NEAR(single.value, preds[i].value, 1e-12);
  }
}

TEST(TwinPredict, LeaveOneAnchorOut) {
  const Dataset d = random_dataset(30, 2, 3);
  const TwinModel tm = twin_fit(LearnerConfig::make_forest(small_forest()), d, PairingStrategy::full(true),
                                std::nullopt, 4);
  const Eigen::RowVectorXd q = random_dataset(1, 2, 4).features.row(0);
  const auto all = twin_predict(tm, q, AnchorPolicy::all());
  const double n = 30.0;
  for (Index r : {0, 7, 29}) {
    std::vector<Index> rest;
    for (Index i = 0; i < 30; ++i)
      if (i != r) rest.push_back(i);
    const auto loo = twin_predict(tm, q, AnchorPolicy::fixed(rest));
    EXPECT_NEAR(loo.value, (n * all.value - all.per_anchor_values[r]) / (n - 1.0), 1e-12);
  }
}

TEST(TwinPredict, AntisymmetricBaseSymmetrizationIdempotent) {
  const Dataset d = random_dataset(20, 3, 5);
  const TwinModel tm = make_twin_model(
      difference_model(3, [](const Eigen::RowVectorXd& x) { return std::sin(x[0]) + x[1] * x[2]; }), d, false);
  const Dataset q = random_dataset(10, 3, 6);
  const auto sym = twin_predict_batch(tm, q.features, AnchorPolicy::all(true));
  const auto raw = twin_predict_batch(tm, q.features, AnchorPolicy::all(false));
  for (std::size_t i = 0; i < sym.size(); ++i) {
    EXPECT_LT((sym[i].per_anchor_values - raw[i].per_anchor_values).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TwinPredict, NearestZeroModelEqualsKnn) {
  const Dataset d = random_dataset(50, 3, 7);
  const TwinModel tm = zero_twin(d);
  const Dataset q = random_dataset(20, 3, 8);
  for (Index m : {1, 3, 10, 50}) {
    const KnnModel knn(d.features, d.targets, m);
    const Vector expected = knn.predict(q.features);
    const Vector got = twin_predict_values(tm, q.features, AnchorPolicy::nearest(m));
    EXPECT_LT((expected - got).cwiseAbs().maxCoeff(), 1e-12) << "m=" << m;
  }
}

TEST(TwinPredict, PolicyValidation) {
  const Dataset d = random_dataset(5, 2, 9);
  const TwinModel tm = zero_twin(d);
  const Eigen::RowVectorXd q = d.features.row(0);
  EXPECT_THROW(twin_predict(tm, q, AnchorPolicy::fixed({})), std::invalid_argument);
  EXPECT_THROW(twin_predict(tm, q, AnchorPolicy::fixed({5})), std::invalid_argument);
  EXPECT_THROW(twin_predict(tm, q, AnchorPolicy::nearest(0)), std::invalid_argument);
  EXPECT_THROW(twin_predict(tm, q, AnchorPolicy::nearest(6)), std::invalid_argument);
  EXPECT_THROW(twin_predict(tm, Eigen::RowVectorXd::Zero(3), AnchorPolicy::all()), std::invalid_argument);
}

TEST(TwinFit, ConstantTargets) {
  Dataset d = random_dataset(25, 2, 10);
  d.targets.setConstant(4.25);
  const TwinModel tm = twin_fit(LearnerConfig::make_forest(small_forest()), d, PairingStrategy::full(true),
                                std::nullopt, 1);
  const auto preds = twin_predict_batch(tm, random_dataset(8, 2, 11).features, AnchorPolicy::all());
  for (const auto& p : preds) {
    for (Index a = 0; a < p.per_anchor_values.size(); ++a) EXPECT_EQ(p.per_anchor_values[a], 4.25);
  }
}

TEST(TwinFit, BaseSeesAllPairs) {
  const Dataset d = random_dataset(10, 2, 12);
  const TwinModel tm = twin_fit(LearnerConfig::make_knn(1), d, PairingStrategy::full(), std::nullopt, 0);
  const auto* knn = dynamic_cast<const KnnModel*>(tm.base.get());
  ASSERT_NE(knn, nullptr);
  EXPECT_EQ(knn->features().rows(), 100);
  EXPECT_EQ(tm.anchor_count(), 10);
}

TEST(TwinFit, LinearTargetWithLinearBase) {
  auto rng = make_rng(13, 0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(60, 3);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const Vector w = (Vector(3) << 0.5, -1.5, 2.0).finished();
  const Dataset train = make_dataset(x.topRows(40), x.topRows(40) * w);
  const Dataset test = make_dataset(x.bottomRows(20), x.bottomRows(20) * w);
  MlpConfig c;
  c.hidden = {};
  c.max_epochs = 200;
  const TwinModel tm = twin_fit(LearnerConfig::make_mlp(c), train, PairingStrategy::full(), std::nullopt, 2);
  EXPECT_LT(rmse(twin_predict_values(tm, test.features, AnchorPolicy::all()), test.targets), 1e-2);
}

TEST(TwinFit, TargetShiftEquivariance) {
  // Dyadic targets keep every pair difference exact under the shift.
  Dataset d = random_dataset(30, 2, 14);
  for (Index i = 0; i < d.rows(); ++i) d.targets[i] = std::round(d.targets[i] * 64.0) / 64.0;
  Dataset shifted = d;
  shifted.targets.array() += 8.0;
  const auto cfg = LearnerConfig::make_forest(small_forest());
  const TwinModel a = twin_fit(cfg, d, PairingStrategy::full(true), std::nullopt, 5);
  const TwinModel b = twin_fit(cfg, shifted, PairingStrategy::full(true), std::nullopt, 5);
  const Matrix q = random_dataset(12, 2, 15).features;
  const Vector pa = twin_predict_values(a, q, AnchorPolicy::all());
  const Vector pb = twin_predict_values(b, q, AnchorPolicy::all());
  EXPECT_LT(((pb - pa).array() - 8.0).abs().maxCoeff(), 1e-12);
}

TEST(Materialize, MatchesUnsymmetrizedPrediction) {
  const Dataset d = random_dataset(12, 2, 16);
  const TwinModel tm = twin_fit(LearnerConfig::make_forest(small_forest()), d, PairingStrategy::full(true),
                                std::nullopt, 6);
  const Matrix q = random_dataset(7, 2, 17).features;
  Vector mean = Vector::Zero(q.rows());
  for (Index j = 0; j < tm.anchor_count(); ++j) mean += materialize_anchored_predictor(tm, j).predict(q);
  mean /= static_cast<double>(tm.anchor_count());
  EXPECT_LT((mean - twin_predict_values(tm, q, AnchorPolicy::all(false))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(materialize_anchored_predictor(tm, 12), std::invalid_argument);
  EXPECT_THROW(materialize_anchored_predictor(tm, -1), std::invalid_argument);
}

TEST(Materialize, ZeroModelIsConstantAndSelfQuery) {
  const Dataset d = random_dataset(6, 2, 18);
  const auto p = materialize_anchored_predictor(zero_twin(d), 2);
  const Vector out = p.predict(random_dataset(5, 2, 19).features);
  for (Index i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], d.targets[2]);

  const TwinModel exact = make_twin_model(
      difference_model(2, [](const Eigen::RowVectorXd& x) { return 3.0 * x[0] - x[1]; }), d, false);
  const auto pj = materialize_anchored_predictor(exact, 4);
  EXPECT_EQ(pj(d.features.row(4)), d.targets[4]);
}

TEST(LoopViolation, Examples) {
  const Dataset d = random_dataset(4, 2, 20);
  const auto x1 = d.features.row(0), x2 = d.features.row(1), x3 = d.features.row(2);
  EXPECT_EQ(loop_violation(zero_twin(d), x1, x2, x3), 0.0);
  const TwinModel lin = make_twin_model(
      difference_model(2, [](const Eigen::RowVectorXd& x) { return 0.7 * x[0] - 2.0 * x[1]; }), d, false);
  EXPECT_NEAR(loop_violation(lin, x1, x2, x3), 0.0, 1e-12);
  // F(x1,x2)=1, F(x2,x3)=2, F(x3,x1)=-3 on 1-D points 1, 2, 3.
  Matrix p(3, 1);
  p << 1, 2, 3;
  auto table = std::make_shared<RowFunctionModel>(2, [](const Eigen::RowVectorXd& r) {
    if (r[0] == 1 && r[1] == 2) return 1.0;
    if (r[0] == 2 && r[1] == 3) return 2.0;
    return -3.0;
  });
  const TwinModel tt = make_twin_model(table, make_dataset(p, Vector::Zero(3)), false);
  EXPECT_EQ(loop_violation(tt, p.row(0), p.row(1), p.row(2)), 0.0);
}

TEST(TwinGridSearch, SelectsAndRefits) {
  const Dataset d = random_dataset(30, 2, 21);
  ForestGrid g;
  g.max_depth = {2, 8};
  g.max_features = {1.0};
  g.min_samples_leaf = {1};
  g.min_samples_split = {2};
  g.n_estimators = {5};
  g.cv_folds = 3;
  const auto a = twin_grid_search_cv(LearnerConfig::make_forest({}, g), d, PairingStrategy::full(true), 7);
  const auto b = twin_grid_search_cv(LearnerConfig::make_forest({}, g), d, PairingStrategy::full(true), 7);
  EXPECT_EQ(a.selection.best, b.selection.best);
  ASSERT_EQ(a.selection.scores.size(), 2u);
  const auto* forest = dynamic_cast<const ForestModel*>(a.model.base.get());
  ASSERT_NE(forest, nullptr);
  EXPECT_EQ(forest->params(), a.selection.best);
  EXPECT_EQ(a.model.anchor_count(), 30);
}

TEST(TwinPersistence, RoundTrip) {
  const Dataset d = random_dataset(15, 3, 22);
  TwinModel tm = twin_fit(LearnerConfig::make_forest(small_forest()), d, PairingStrategy::full(true),
                          std::nullopt, 8);
  tm.input_scaler = fit_scaler(random_dataset(40, 3, 23));
  const auto path = std::filesystem::temp_directory_path() / "twinreg_test_twin.json";
  save_twin(tm, path);
  const TwinModel back = load_twin(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.anchor_count(), 15);
  EXPECT_TRUE(back.anchors.features == tm.anchors.features);
  EXPECT_EQ(back.augment, tm.augment);
  ASSERT_TRUE(back.input_scaler.has_value());
  EXPECT_TRUE(back.input_scaler->mean == tm.input_scaler->mean);
  const Matrix q = random_dataset(6, 3, 24).features;
  EXPECT_TRUE(twin_predict_values(back, q, AnchorPolicy::all()) == twin_predict_values(tm, q, AnchorPolicy::all()));
  EXPECT_EQ(tm.storage_count(), tm.base->parameter_count() + 15u * 4u);
}
