#include "twinreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "twinreg/cross_validation.hpp"
#include "twinreg/forest.hpp"
#include "twinreg/knn.hpp"
#include "twinreg/metrics.hpp"
#include "twinreg/model_io.hpp"
#include "twinreg/random.hpp"
#include "twinreg/semisup.hpp"
#include "twinreg/twin.hpp"

namespace twinreg {

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<MethodKind, const char*> kMethodNames[] = {
    {MethodKind::ann, "ann"},
    {MethodKind::ann_ensemble, "ann_ensemble"},
    {MethodKind::tnnr, "tnnr"},
    {MethodKind::tnnr_ensemble, "tnnr_ensemble"},
    {MethodKind::nntnnr, "nntnnr"},
    {MethodKind::knn, "knn"},
    {MethodKind::rf, "rf"},
    {MethodKind::twin_rf, "twin_rf"},
    {MethodKind::semisup_rf, "semisup_rf"},
};

constexpr std::pair<SweepAxis, const char*> kAxisNames[] = {
    {SweepAxis::none, "none"},
    {SweepAxis::ensemble_size, "ensemble_size"},
    {SweepAxis::multiplier, "multiplier"},
    {SweepAxis::neighbors, "neighbors"},
    {SweepAxis::lambda, "lambda"},
    {SweepAxis::anchors, "anchors"},
};

}  // namespace

std::string to_string(MethodKind k) {
  for (const auto& [kind, name] : kMethodNames)
    if (kind == k) return name;
  return "unknown";
}

MethodKind method_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kMethodNames)
    if (s == name) return kind;
  throw std::invalid_argument("unknown method: " + s);
}

std::string to_string(SweepAxis a) {
  for (const auto& [axis, name] : kAxisNames)
    if (axis == a) return name;
  return "unknown";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  for (const auto& [axis, name] : kAxisNames)
    if (s == name) return axis;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

std::string MethodSpec::label() const {
  std::ostringstream out;
  out << to_string(kind);
  switch (kind) {
    case MethodKind::ann_ensemble:
    case MethodKind::tnnr_ensemble: out << "(E=" << ensemble_size << ")"; break;
    case MethodKind::tnnr:
      if (multiplier) out << "(multiplier=" << *multiplier << ")";
      if (anchors) out << "(anchors=" << *anchors << ")";
      break;
    case MethodKind::nntnnr:
      out << "(m=" << neighbors << ", train=" << (train_mode == NnTrainMode::nearest ? "nn" : "all") << ")";
      break;
    case MethodKind::knn: out << "(k=" << k << ")"; break;
    case MethodKind::semisup_rf: out << "(lambda=" << loop_weight << ")"; break;
    default: break;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw std::invalid_argument("experiment: repetitions must be >= 1");
  if (jobs < 1) throw std::invalid_argument("experiment: jobs must be >= 1");
  if (axis != SweepAxis::none && sweep_values.empty()) {
    throw std::invalid_argument("experiment: sweep requested without values");
  }
  const auto& m = method;
  if (m.ensemble_size < 1) throw std::invalid_argument("experiment: ensemble size must be >= 1");
  if (m.multiplier && *m.multiplier < 0) throw std::invalid_argument("experiment: multiplier must be >= 0");
  if (m.neighbors < 1) throw std::invalid_argument("experiment: neighbors must be >= 1");
  if (m.k < 1) throw std::invalid_argument("experiment: k must be >= 1");
  if (!(m.loop_weight >= 0.0)) throw std::invalid_argument("experiment: lambda must be >= 0");
  if (m.anchors && *m.anchors < 1) throw std::invalid_argument("experiment: anchors must be >= 1");

  auto need = [&](std::initializer_list<MethodKind> kinds) {
    if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end()) {
      throw std::invalid_argument("experiment: sweep axis '" + to_string(axis) +
                                  "' does not apply to method '" + to_string(m.kind) + "'");
    }
  };
  switch (axis) {
    case SweepAxis::none: break;
    case SweepAxis::ensemble_size: need({MethodKind::ann_ensemble, MethodKind::tnnr_ensemble}); break;
    case SweepAxis::multiplier: need({MethodKind::tnnr}); break;
    case SweepAxis::neighbors: need({MethodKind::nntnnr, MethodKind::knn}); break;
    case SweepAxis::lambda: need({MethodKind::semisup_rf}); break;
    case SweepAxis::anchors: need({MethodKind::tnnr}); break;
  }
  if (m.kind == MethodKind::rf || m.kind == MethodKind::twin_rf || m.kind == MethodKind::semisup_rf) {
    grid.validate();
  }
  ann_mlp.validate();
  twin_mlp.validate();
}

SplitSpec ExperimentConfig::split_for(Index repetition) const {
  return SplitSpec{derive_seed(seed, 5000 + static_cast<std::uint64_t>(repetition)), split};
}

nlohmann::json to_json(const MlpConfig& c) {
  return {{"hidden", c.hidden},
          {"activation", c.activation == Activation::relu ? "relu" : "tanh"},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"max_steps", c.max_steps},
          {"optimizer", c.optimizer == OptimizerKind::adadelta ? "adadelta" : "adam"},
          {"learning_rate", c.learning_rate},
          {"rho", c.rho},
          {"epsilon", c.epsilon},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"plateau_patience", c.plateau_patience},
          {"lr_factor", c.lr_factor},
          {"min_learning_rate", c.min_learning_rate},
          {"early_stop_patience", c.early_stop_patience},
          {"min_relative_improvement", c.min_relative_improvement},
          {"validation_fraction", c.validation_fraction},
          {"standardize_targets", c.standardize_targets}};
}

MlpConfig mlp_config_from_json(const nlohmann::json& j, MlpConfig c) {
  if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<Index>>();
  if (j.contains("activation")) {
    const auto a = j["activation"].get<std::string>();
    if (a != "relu" && a != "tanh") throw std::invalid_argument("unknown activation: " + a);
    c.activation = a == "relu" ? Activation::relu : Activation::tanh;
  }
  if (j.contains("optimizer")) {
    const auto o = j["optimizer"].get<std::string>();
    if (o != "adadelta" && o != "adam") throw std::invalid_argument("unknown optimizer: " + o);
    c.optimizer = o == "adadelta" ? OptimizerKind::adadelta : OptimizerKind::adam;
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.rho = j.value("rho", c.rho);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.lr_factor = j.value("lr_factor", c.lr_factor);
  c.min_learning_rate = j.value("min_learning_rate", c.min_learning_rate);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.min_relative_improvement = j.value("min_relative_improvement", c.min_relative_improvement);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.standardize_targets = j.value("standardize_targets", c.standardize_targets);
  return c;
}

nlohmann::json to_json(const ForestGrid& g) {
  return {{"max_depth", g.max_depth},
          {"max_features", g.max_features},
          {"min_samples_leaf", g.min_samples_leaf},
          {"min_samples_split", g.min_samples_split},
          {"n_estimators", g.n_estimators},
          {"cv_folds", g.cv_folds}};
}

ForestGrid forest_grid_from_json(const nlohmann::json& j, ForestGrid g) {
  if (j.contains("max_depth")) g.max_depth = j["max_depth"].get<std::vector<Index>>();
  if (j.contains("max_features")) g.max_features = j["max_features"].get<std::vector<double>>();
  if (j.contains("min_samples_leaf")) g.min_samples_leaf = j["min_samples_leaf"].get<std::vector<Index>>();
  if (j.contains("min_samples_split")) g.min_samples_split = j["min_samples_split"].get<std::vector<Index>>();
  if (j.contains("n_estimators")) g.n_estimators = j["n_estimators"].get<std::vector<Index>>();
  g.cv_folds = j.value("cv_folds", g.cv_folds);
  return g;
}

nlohmann::json to_json(const MethodSpec& m) {
  nlohmann::json j = {{"kind", to_string(m.kind)},
                      {"ensemble_size", m.ensemble_size},
                      {"neighbors", m.neighbors},
                      {"train_mode", m.train_mode == NnTrainMode::nearest ? "nearest" : "all"},
                      {"k", m.k},
                      {"lambda", m.loop_weight},
                      {"symmetric", m.symmetric},
                      {"augment", m.augment}};
  j["multiplier"] = m.multiplier ? nlohmann::json(*m.multiplier) : nlohmann::json(nullptr);
  j["anchors"] = m.anchors ? nlohmann::json(*m.anchors) : nlohmann::json(nullptr);
  return j;
}

MethodSpec method_from_json(const nlohmann::json& j, MethodSpec m) {
  if (j.is_string()) {
    m.kind = method_kind_from_string(j.get<std::string>());
    return m;
  }
  if (j.contains("kind")) m.kind = method_kind_from_string(j["kind"].get<std::string>());
  m.ensemble_size = j.value("ensemble_size", m.ensemble_size);
  m.neighbors = j.value("neighbors", m.neighbors);
  if (j.contains("train_mode")) {
    const auto t = j["train_mode"].get<std::string>();
    if (t != "nearest" && t != "all") throw std::invalid_argument("unknown train_mode: " + t);
    m.train_mode = t == "nearest" ? NnTrainMode::nearest : NnTrainMode::all_pairs;
  }
  m.k = j.value("k", m.k);
  m.loop_weight = j.value("lambda", m.loop_weight);
  m.symmetric = j.value("symmetric", m.symmetric);
  m.augment = j.value("augment", m.augment);
  if (j.contains("multiplier")) {
    m.multiplier = j["multiplier"].is_null() ? std::nullopt : std::optional<Index>(j["multiplier"].get<Index>());
  }
  if (j.contains("anchors")) {
    m.anchors = j["anchors"].is_null() ? std::nullopt : std::optional<Index>(j["anchors"].get<Index>());
  }
  return m;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["dataset"] = c.dataset;
  j["target_column"] = c.target_column;
  j["dataset_size"] = c.dataset_size;
  j["data_seed"] = c.data_seed;
  j["method"] = to_json(c.method);
  if (const auto* f = std::get_if<SplitFractions>(&c.split)) {
    j["split"] = {{"train", f->train}, {"validation", f->validation}, {"test", f->test}};
  } else {
    const auto& n = std::get<SplitCounts>(c.split);
    j["split"] = {{"train_n", n.train}, {"test_n", n.test}};
  }
  j["repetitions"] = c.repetitions;
  j["seed"] = c.seed;
  j["ann_mlp"] = to_json(c.ann_mlp);
  j["twin_mlp"] = to_json(c.twin_mlp);
  j["grid"] = to_json(c.grid);
  j["transductive"] = c.transductive;
  j["loop_count"] = c.loop_count ? nlohmann::json(*c.loop_count) : nlohmann::json(nullptr);
  j["sweep"] = {{"axis", to_string(c.axis)}, {"values", c.sweep_values}};
  j["output_dir"] = c.output_dir.string();
  j["record_timing"] = c.record_timing;
  j["jobs"] = c.jobs;
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  c.dataset = j.value("dataset", c.dataset);
  c.target_column = j.value("target_column", c.target_column);
  c.dataset_size = j.value("dataset_size", c.dataset_size);
  c.data_seed = j.value("data_seed", c.data_seed);
  if (j.contains("method")) c.method = method_from_json(j["method"], c.method);
  if (j.contains("split")) {
    const auto& s = j["split"];
    if (s.contains("train_n") || s.contains("test_n")) {
      c.split = SplitCounts{s.value("train_n", Index{100}), s.value("test_n", Index{100})};
    } else {
      c.split = SplitFractions{s.value("train", 0.7), s.value("validation", 0.1), s.value("test", 0.2)};
    }
  }
  c.repetitions = j.value("repetitions", c.repetitions);
  c.seed = j.value("seed", c.seed);
  if (j.contains("ann_mlp")) c.ann_mlp = mlp_config_from_json(j["ann_mlp"], c.ann_mlp);
  if (j.contains("twin_mlp")) c.twin_mlp = mlp_config_from_json(j["twin_mlp"], c.twin_mlp);
  if (j.contains("grid")) c.grid = forest_grid_from_json(j["grid"], c.grid);
  c.transductive = j.value("transductive", c.transductive);
  if (j.contains("loop_count")) {
    c.loop_count = j["loop_count"].is_null() ? std::nullopt : std::optional<Index>(j["loop_count"].get<Index>());
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    if (s.contains("axis")) c.axis = sweep_axis_from_string(s["axis"].get<std::string>());
    if (s.contains("values")) c.sweep_values = s["values"].get<std::vector<double>>();
  }
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  c.record_timing = j.value("record_timing", c.record_timing);
  c.jobs = j.value("jobs", c.jobs);
  return c;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

std::vector<double> ExperimentResult::rmses() const {
  std::vector<double> out;
  out.reserve(repetitions.size());
  for (const auto& r : repetitions) out.push_back(r.rmse);
  return out;
}

void ExperimentResult::summarize() {
  const auto v = rmses();
  mean_rmse = mean(v);
  standard_error = twinreg::standard_error(v);
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json j;
  j["method"] = twinreg::to_json(method);
  j["label"] = method.label();
  j["sweep_value"] = sweep_value ? nlohmann::json(*sweep_value) : nlohmann::json(nullptr);
  j["mean_rmse"] = mean_rmse;
  j["standard_error"] = standard_error;
  auto reps = nlohmann::json::array();
  for (const auto& r : repetitions) {
    reps.push_back({{"repetition", r.repetition},
                    {"seed", r.seed},
                    {"rmse", r.rmse},
                    {"train_s", r.train_seconds},
                    {"infer_s", r.infer_seconds},
                    {"parameter_count", r.parameter_count}});
  }
  j["repetitions"] = std::move(reps);
  return j;
}

// ---------------------------------------------------------------------------
// Repetition machinery
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// One repetition's standardized split plus models shared across sweep values.
struct RepContext {
  const ExperimentConfig& cfg;
  Index repetition;
  std::uint64_t seed;
  Split split;
  Matrix leftover;  // standardized rows outside train/validation/test

  template <typename T>
  struct Entry {
    T value;
    double seconds;
  };
  std::map<std::string, Entry<ModelPtr>> models;
  std::map<std::string, Entry<TwinModel>> twins;

  std::optional<Dataset> validation() const {
    if (split.validation.empty()) return std::nullopt;
    return split.validation;
  }
  std::optional<ValidationData> validation_data() const {
    if (split.validation.empty()) return std::nullopt;
    return ValidationData{split.validation.features, split.validation.targets};
  }
};

template <typename T, typename Make>
const T& cached(std::map<std::string, RepContext::Entry<T>>& store, const std::string& key,
                double& train_seconds, Make&& make) {
  auto it = store.find(key);
  if (it == store.end()) {
    const auto t0 = Clock::now();
    T value = make();
    it = store.emplace(key, RepContext::Entry<T>{std::move(value), seconds_since(t0)}).first;
  }
  train_seconds += it->second.seconds;
  return it->second.value;
}

RepContext make_context(const ExperimentConfig& cfg, const Dataset& data, Index rep) {
  const SplitSpec spec = cfg.split_for(rep);
  Split raw = split(data, spec);
  const Scaler scaler = fit_scaler(raw.train);

  std::vector<char> used(static_cast<std::size_t>(data.rows()), 0);
  for (const auto* idx : {&raw.indices.train, &raw.indices.validation, &raw.indices.test})
    for (Index i : *idx) used[static_cast<std::size_t>(i)] = 1;
  std::vector<Index> rest;
  for (Index i = 0; i < data.rows(); ++i)
    if (!used[static_cast<std::size_t>(i)]) rest.push_back(i);

  RepContext ctx{cfg, rep, spec.seed, {}, {}, {}, {}};
  ctx.split.indices = raw.indices;
  ctx.split.train = apply_scaler(scaler, raw.train);
  ctx.split.validation = raw.validation.empty() ? raw.validation : apply_scaler(scaler, raw.validation);
  ctx.split.test = apply_scaler(scaler, raw.test);
  if (!rest.empty()) ctx.leftover = scaler.transform(data.subset(rest).features);
  return ctx;
}

PairingStrategy tnnr_strategy(const MethodSpec& m, Index n_train) {
  if (!m.multiplier || *m.multiplier == 0 || *m.multiplier >= n_train) {
    return PairingStrategy::full(m.augment);
  }
  return PairingStrategy::multiplier(*m.multiplier, m.augment);
}

std::string strategy_key(const PairingStrategy& s) {
  std::ostringstream out;
  if (std::holds_alternative<FullPairing>(s.mode)) {
    out << "full";
  } else if (const auto* k = std::get_if<MultiplierPairing>(&s.mode)) {
    out << "mult" << k->k;
  } else {
    out << "nn" << std::get<NearestNeighborPairing>(s.mode).m;
  }
  out << (s.augment ? "+aug" : "");
  return out.str();
}

const TwinModel& tnnr_member(RepContext& ctx, const PairingStrategy& strategy, Index member,
                             double& train_seconds) {
  const std::string key = "tnnr/" + strategy_key(strategy) + "/" + std::to_string(member);
  return cached(ctx.twins, key, train_seconds, [&] {
    return twin_fit(LearnerConfig::make_mlp(ctx.cfg.twin_mlp), ctx.split.train, strategy,
                    ctx.validation(), derive_seed(ctx.seed, 300 + static_cast<std::uint64_t>(member)));
  });
}

const ModelPtr& ann_member(RepContext& ctx, Index member, double& train_seconds) {
  return cached(ctx.models, "ann/" + std::to_string(member), train_seconds, [&] {
    return fit(LearnerConfig::make_mlp(ctx.cfg.ann_mlp), ctx.split.train.features,
               ctx.split.train.targets, ctx.validation_data(),
               derive_seed(ctx.seed, 200 + static_cast<std::uint64_t>(member)));
  });
}

const TwinModel& twin_forest(RepContext& ctx, double& train_seconds) {
  return cached(ctx.twins, "twin_rf", train_seconds, [&] {
    LearnerConfig lc = LearnerConfig::make_forest({}, ctx.cfg.grid);
    return twin_grid_search_cv(lc, ctx.split.train, PairingStrategy::full(true), ctx.seed).model;
  });
}

RepetitionResult evaluate(const MethodSpec& m, RepContext& ctx) {
  RepetitionResult res;
  res.repetition = ctx.repetition;
  res.seed = ctx.seed;
  const Dataset& train = ctx.split.train;
  const Dataset& test = ctx.split.test;
  if (test.empty()) throw std::invalid_argument("experiment: test split is empty");
  const auto anchor_weight = static_cast<std::size_t>(train.feature_count() + 1);

  Vector pred;
  double infer = 0.0;
  auto timed_predict = [&](auto&& fn) {
    const auto t0 = Clock::now();
    pred = fn();
    infer += seconds_since(t0);
  };

  switch (m.kind) {
    case MethodKind::ann:
    case MethodKind::ann_ensemble: {
      const Index members = m.kind == MethodKind::ann ? 1 : m.ensemble_size;
      std::vector<ModelPtr> nets;
      for (Index e = 0; e < members; ++e) nets.push_back(ann_member(ctx, e, res.train_seconds));
      timed_predict([&] {
        Vector sum = Vector::Zero(test.rows());
        for (const auto& net : nets) sum += net->predict(test.features);
        return Vector(sum / static_cast<double>(members));
      });
      res.parameter_count = static_cast<std::size_t>(members) * nets.front()->parameter_count();
      break;
    }
    case MethodKind::tnnr:
    case MethodKind::tnnr_ensemble: {
      const Index members = m.kind == MethodKind::tnnr ? 1 : m.ensemble_size;
      const auto strategy = tnnr_strategy(m, train.rows());
      std::vector<const TwinModel*> twins;
      for (Index e = 0; e < members; ++e) twins.push_back(&tnnr_member(ctx, strategy, e, res.train_seconds));
      AnchorPolicy policy = AnchorPolicy::all(m.symmetric);
      Index anchor_count = train.rows();
      if (m.anchors && *m.anchors < train.rows()) {
        // Nested random subsets: anchors=a uses the first a of one per-repetition permutation.
        std::vector<Index> perm(static_cast<std::size_t>(train.rows()));
        std::iota(perm.begin(), perm.end(), Index{0});
        auto rng = make_rng(ctx.seed, 51);
        std::shuffle(perm.begin(), perm.end(), rng);
        perm.resize(static_cast<std::size_t>(*m.anchors));
        policy = AnchorPolicy::fixed(std::move(perm), m.symmetric);
        anchor_count = *m.anchors;
      }
      timed_predict([&] {
        Vector sum = Vector::Zero(test.rows());
        for (const auto* tm : twins) sum += twin_predict_values(*tm, test.features, policy);
        return Vector(sum / static_cast<double>(members));
      });
      res.parameter_count = static_cast<std::size_t>(members) * twins.front()->base->parameter_count() +
                            static_cast<std::size_t>(anchor_count) * anchor_weight;
      break;
    }
    case MethodKind::nntnnr: {
      const bool nn_train = m.train_mode == NnTrainMode::nearest && m.neighbors < train.rows();
      const auto strategy = nn_train ? PairingStrategy::nearest(m.neighbors, m.augment)
                                     : PairingStrategy::full(m.augment);
      const TwinModel& tm = tnnr_member(ctx, strategy, 0, res.train_seconds);
      const auto policy = m.neighbors >= train.rows() ? AnchorPolicy::all(m.symmetric)
                                                      : AnchorPolicy::nearest(m.neighbors, m.symmetric);
      timed_predict([&] { return twin_predict_values(tm, test.features, policy); });
      res.parameter_count = tm.storage_count();
      break;
    }
    case MethodKind::knn: {
      const auto t0 = Clock::now();
      const KnnModel model(train.features, train.targets, std::min(m.k, train.rows()));
      res.train_seconds += seconds_since(t0);
      timed_predict([&] { return model.predict(test.features); });
      res.parameter_count = model.parameter_count();
      break;
    }
    case MethodKind::rf: {
      const ModelPtr& model = cached(ctx.models, "rf", res.train_seconds, [&] {
        return grid_search_cv(LearnerConfig::make_forest({}, ctx.cfg.grid), train.features,
                              train.targets, ctx.seed)
            .model;
      });
      timed_predict([&] { return model->predict(test.features); });
      res.parameter_count = model->parameter_count();
      break;
    }
    case MethodKind::twin_rf: {
      const TwinModel& tm = twin_forest(ctx, res.train_seconds);
      timed_predict([&] { return twin_predict_values(tm, test.features, AnchorPolicy::all(m.symmetric)); });
      res.parameter_count = tm.storage_count();
      break;
    }
    case MethodKind::semisup_rf: {
      const TwinModel& supervised = twin_forest(ctx, res.train_seconds);
      const Matrix& unlabeled = ctx.cfg.transductive ? test.features
                                : ctx.leftover.rows() >= 2 ? ctx.leftover
                                                           : ctx.split.validation.features;
      if (unlabeled.rows() < 2) {
        throw std::invalid_argument("semisup_rf: inductive mode needs at least 2 unused rows");
      }
      SemiSupConfig sc;
      sc.loop_weight = m.loop_weight;
      sc.loop_count = ctx.cfg.loop_count;
      sc.transductive = ctx.cfg.transductive;
      const auto t0 = Clock::now();
      const auto semi = semisup_refit(LearnerConfig::make_forest({}, ctx.cfg.grid), supervised, train,
                                      unlabeled, sc, ctx.seed);
      res.train_seconds += seconds_since(t0);
      timed_predict([&] { return twin_predict_values(semi.model, test.features, AnchorPolicy::all(m.symmetric)); });
      res.parameter_count = semi.model.storage_count();
      break;
    }
  }

  res.infer_seconds = infer;
  res.rmse = rmse(pred, test.targets);
  if (!ctx.cfg.record_timing) {
    res.train_seconds = 0.0;
    res.infer_seconds = 0.0;
  }
  return res;
}

/// Runs `per_rep` for every repetition on `jobs` worker threads; the
/// lowest-index failure is rethrown as an ExperimentError.
template <typename PerRep>
void for_each_repetition(const ExperimentConfig& cfg, PerRep&& per_rep) {
  const Index reps = cfg.repetitions;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index r = next++; r < reps; r = next++) {
      try {
        per_rep(r);
      } catch (...) {
        errors[static_cast<std::size_t>(r)] = std::current_exception();
      }
    }
  };
  const Index threads = std::min(cfg.jobs, reps);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (Index t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (Index r = 0; r < reps; ++r) {
    if (auto e = errors[static_cast<std::size_t>(r)]) {
      try {
        std::rethrow_exception(e);
      } catch (const std::exception& ex) {
        throw ExperimentError(r, ex.what());
      }
    }
  }
}

}  // namespace

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (is_synthetic_key(cfg.dataset)) {
    return generate_synthetic(cfg.dataset, cfg.dataset_size, cfg.data_seed);
  }
  const ColumnRef target = cfg.target_column.empty() ? ColumnRef{Index{-1}} : ColumnRef{cfg.target_column};
  return load_csv(cfg.dataset, target);
}

MethodSpec apply_sweep_value(const MethodSpec& base, SweepAxis axis, double value) {
  MethodSpec m = base;
  const auto as_count = [&](const char* what) {
    if (!(value >= 0.0) || value != std::floor(value)) {
      throw std::invalid_argument(std::string("sweep: ") + what + " must be a nonnegative integer");
    }
    return static_cast<Index>(value);
  };
  switch (axis) {
    case SweepAxis::none: break;
    case SweepAxis::ensemble_size: m.ensemble_size = as_count("ensemble size"); break;
    case SweepAxis::multiplier: m.multiplier = as_count("multiplier"); break;
    case SweepAxis::neighbors:
      if (m.kind == MethodKind::knn) {
        m.k = as_count("neighbors");
      } else {
        m.neighbors = as_count("neighbors");
      }
      break;
    case SweepAxis::lambda: m.loop_weight = value; break;
    case SweepAxis::anchors: m.anchors = as_count("anchors"); break;
  }
  return m;
}

namespace {

std::vector<ExperimentResult> evaluate_all(const ExperimentConfig& cfg, const Dataset& data,
                                           const std::vector<MethodSpec>& methods,
                                           const std::vector<std::optional<double>>& values) {
  std::vector<ExperimentResult> results(methods.size());
  for (std::size_t k = 0; k < methods.size(); ++k) {
    results[k].method = methods[k];
    results[k].sweep_value = values[k];
    results[k].repetitions.resize(static_cast<std::size_t>(cfg.repetitions));
  }
  for_each_repetition(cfg, [&](Index r) {
    RepContext ctx = make_context(cfg, data, r);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      results[k].repetitions[static_cast<std::size_t>(r)] = evaluate(methods[k], ctx);
    }
  });
  for (auto& res : results) res.summarize();
  return results;
}

}  // namespace

std::vector<ExperimentResult> sweep(const ExperimentConfig& cfg, const Dataset& data) {
  cfg.validate();
  std::vector<std::optional<double>> values;
  if (cfg.axis == SweepAxis::none) {
    values.emplace_back(std::nullopt);
  } else {
    for (double v : cfg.sweep_values) values.emplace_back(v);
  }
  std::vector<MethodSpec> methods;
  for (const auto& v : values) methods.push_back(v ? apply_sweep_value(cfg.method, cfg.axis, *v) : cfg.method);
  return evaluate_all(cfg, data, methods, values);
}

std::vector<ExperimentResult> compare_methods(const ExperimentConfig& cfg, const Dataset& data,
                                              const std::vector<MethodSpec>& methods) {
  if (methods.empty()) throw std::invalid_argument("compare_methods: no methods");
  std::vector<std::optional<double>> values(methods.size());
  for (const auto& m : methods) {
    ExperimentConfig c = cfg;
    c.method = m;
    c.axis = SweepAxis::none;
    c.validate();
  }
  return evaluate_all(cfg, data, methods, values);
}

std::vector<ExperimentResult> sweep(const ExperimentConfig& cfg) { return sweep(cfg, load_dataset(cfg)); }

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  ExperimentConfig single = cfg;
  single.axis = SweepAxis::none;
  single.sweep_values.clear();
  return std::move(sweep(single, data).front());
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, load_dataset(cfg)); }

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string results_csv(const std::vector<ExperimentResult>& results, bool with_timing) {
  std::ostringstream out;
  out << "seed,sweep_value,rmse,train_s,infer_s\n";
  for (const auto& res : results) {
    for (const auto& r : res.repetitions) {
      out << r.seed << ',' << (res.sweep_value ? fmt(*res.sweep_value) : std::string()) << ','
          << fmt(r.rmse) << ',' << fmt(with_timing ? r.train_seconds : 0.0) << ','
          << fmt(with_timing ? r.infer_seconds : 0.0) << '\n';
    }
  }
  return out.str();
}

void write_results(const ExperimentConfig& cfg, const std::vector<ExperimentResult>& results,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["config"] = to_json(cfg);
  auto arr = nlohmann::json::array();
  for (const auto& r : results) arr.push_back(r.to_json());
  j["results"] = std::move(arr);
  write_file_atomic(dir / "result.json", j.dump(2) + "\n");
  write_file_atomic(dir / "result.csv", results_csv(results, cfg.record_timing));
}

std::string multiplier_verdict(const std::vector<double>& rmse_by_multiplier) {
  if (rmse_by_multiplier.size() < 2) return "ok";
  for (std::size_t k = 1; k < rmse_by_multiplier.size(); ++k) {
    if (!(rmse_by_multiplier[k] > rmse_by_multiplier[k - 1])) return "ok";
  }
  return "reject-tnnr";
}

MultiplierCheck multiplier_check(const ExperimentConfig& cfg, const Dataset& data) {
  MultiplierCheck check;
  ExperimentConfig c = cfg;
  c.method.kind = MethodKind::tnnr;
  c.method.anchors.reset();
  c.axis = SweepAxis::multiplier;
  c.sweep_values.assign(check.multipliers.begin(), check.multipliers.end());
  for (const auto& res : sweep(c, data)) check.rmse.push_back(res.mean_rmse);
  check.verdict = multiplier_verdict(check.rmse);
  return check;
}

MultiplierCheck multiplier_check(const ExperimentConfig& cfg) { return multiplier_check(cfg, load_dataset(cfg)); }

}  // namespace twinreg
