#include "twinreg/twin.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "twinreg/forest.hpp"
#include "twinreg/metrics.hpp"
#include "twinreg/model_io.hpp"

namespace twinreg {

std::size_t TwinModel::storage_count() const {
  return base->parameter_count() +
         static_cast<std::size_t>(anchor_count() * (feature_count() + 1));
}

TwinModel make_twin_model(ModelPtr base, Dataset anchors, bool augment) {
  if (!base) throw std::invalid_argument("twin: base model is null");
  if (anchors.rows() < 1) throw std::invalid_argument("twin: anchor store is empty");
  if (base->input_width() != pair_width(anchors.feature_count(), augment)) {
    throw std::invalid_argument("twin: base model width does not match pair width");
  }
  TwinModel tm;
  tm.base = std::move(base);
  tm.anchors = std::move(anchors);
  tm.augment = augment;
  return tm;
}

void AnchorPolicy::validate(Index anchor_count) const {
  switch (mode) {
    case Mode::all:
      if (anchor_count < 1) throw std::invalid_argument("anchor policy: no anchors");
      break;
    case Mode::fixed_subset:
      if (indices.empty()) throw std::invalid_argument("anchor policy: empty anchor selection");
      for (Index i : indices) {
        if (i < 0 || i >= anchor_count) {
          throw std::invalid_argument("anchor policy: anchor index " + std::to_string(i) +
                                      " out of range");
        }
      }
      break;
    case Mode::nearest:
      if (m < 1 || m > anchor_count) {
        throw std::invalid_argument("anchor policy: nearest m=" + std::to_string(m) +
                                    " must lie in [1, " + std::to_string(anchor_count) + "]");
      }
      break;
  }
}

TwinModel twin_fit(const LearnerConfig& learner, const Dataset& train, const PairingStrategy& strategy,
                   const std::optional<Dataset>& validation, std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("twin_fit: training set is empty");
  const PairedDataset pairs = build_pairs(train, strategy, seed);

  std::optional<ValidationData> val_pairs;
  if (learner.kind == LearnerKind::mlp && validation && !validation->empty()) {
    if (validation->feature_count() != train.feature_count()) {
      throw std::invalid_argument("twin_fit: validation width mismatch");
    }
    const Index nv = validation->rows();
    const Index nt = train.rows();
    // Nearest-neighbour training is validated on the pairs it will be queried with.
    const auto* nn = std::get_if<NearestNeighborPairing>(&strategy.mode);
    const Index per_row = nn ? std::min(nn->m, nt) : nt;
    Matrix left(2 * nv * per_row, train.feature_count());
    Matrix right(2 * nv * per_row, train.feature_count());
    Vector y(2 * nv * per_row);
    Index r = 0;
    for (Index v = 0; v < nv; ++v) {
      std::vector<Index> partners;
      if (nn) {
        partners = nearest_neighbors(validation->features.row(v), train.features, per_row);
      } else {
        partners.resize(static_cast<std::size_t>(nt));
        for (Index t = 0; t < nt; ++t) partners[static_cast<std::size_t>(t)] = t;
      }
      for (Index t : partners) {
        left.row(r) = validation->features.row(v);
        right.row(r) = train.features.row(t);
        y[r++] = validation->targets[v] - train.targets[t];
        left.row(r) = train.features.row(t);
        right.row(r) = validation->features.row(v);
        y[r++] = train.targets[t] - validation->targets[v];
      }
    }
    val_pairs = ValidationData{make_pair_features(left, right, strategy.augment), std::move(y)};
  }

  auto base = fit(learner, pairs.pair_features, pairs.pair_targets, val_pairs, seed);
  return make_twin_model(std::move(base), train, strategy.augment);
}

Vector pair_predict(const TwinModel& tm, const Matrix& left, const Matrix& right) {
  return tm.base->predict(make_pair_features(left, right, tm.augment));
}

namespace {

constexpr Index kMaxPairRows = 1 << 17;

std::vector<Index> select_anchors(const TwinModel& tm, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                  const AnchorPolicy& policy) {
  switch (policy.mode) {
    case AnchorPolicy::Mode::all: {
      std::vector<Index> all(static_cast<std::size_t>(tm.anchor_count()));
      for (Index i = 0; i < tm.anchor_count(); ++i) all[static_cast<std::size_t>(i)] = i;
      return all;
    }
    case AnchorPolicy::Mode::fixed_subset: return policy.indices;
    case AnchorPolicy::Mode::nearest: return nearest_neighbors(query, tm.anchors.features, policy.m);
  }
  return {};
}

// Runs `queries` through the base model in chunks and hands each query its
// per-anchor values.
template <typename Sink>
void evaluate_queries(const TwinModel& tm, const Matrix& queries, const AnchorPolicy& policy, Sink&& sink) {
  policy.validate(tm.anchor_count());
  if (queries.cols() != tm.feature_count()) {
    throw std::invalid_argument("twin_predict: query width " + std::to_string(queries.cols()) +
                                " does not match anchor width " + std::to_string(tm.feature_count()));
  }
  const Index f = tm.feature_count();
  const Index directions = policy.symmetric ? 2 : 1;

  Index q = 0;
  while (q < queries.rows()) {
    std::vector<std::vector<Index>> chosen;
    Index rows = 0;
    const Index first = q;
    while (q < queries.rows()) {
      auto idx = select_anchors(tm, queries.row(q), policy);
      const Index need = directions * static_cast<Index>(idx.size());
      if (!chosen.empty() && rows + need > kMaxPairRows) break;
      rows += need;
      chosen.push_back(std::move(idx));
      ++q;
    }

    Matrix pair(rows, pair_width(f, tm.augment));
    Index r = 0;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      const auto query = queries.row(first + static_cast<Index>(k));
      for (Index a : chosen[k]) {
        const auto anchor = tm.anchors.features.row(a);
        write_pair_row(pair, r++, query, anchor, tm.augment);
        if (policy.symmetric) write_pair_row(pair, r++, anchor, query, tm.augment);
      }
    }
    const Vector diffs = tm.base->predict(pair);

    r = 0;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      Vector values(static_cast<Index>(chosen[k].size()));
      for (std::size_t s = 0; s < chosen[k].size(); ++s) {
        const double y_anchor = tm.anchors.targets[chosen[k][s]];
        if (policy.symmetric) {
          values[static_cast<Index>(s)] = 0.5 * diffs[r] - 0.5 * diffs[r + 1] + y_anchor;
          r += 2;
        } else {
          values[static_cast<Index>(s)] = diffs[r] + y_anchor;
          r += 1;
        }
      }
      sink(first + static_cast<Index>(k), std::move(values), std::move(chosen[k]));
    }
  }
}

}  // namespace

std::vector<TwinPrediction> twin_predict_batch(const TwinModel& tm, const Matrix& queries,
                                               const AnchorPolicy& policy) {
  std::vector<TwinPrediction> out(static_cast<std::size_t>(queries.rows()));
  evaluate_queries(tm, queries, policy, [&](Index i, Vector values, std::vector<Index> anchors) {
    auto& p = out[static_cast<std::size_t>(i)];
    p.value = values.mean();
    p.uncertainty = std::sqrt((values.array() - p.value).square().mean());
    p.per_anchor_values = std::move(values);
    p.anchors = std::move(anchors);
  });
  return out;
}

Vector twin_predict_values(const TwinModel& tm, const Matrix& queries, const AnchorPolicy& policy) {
  Vector out(queries.rows());
  evaluate_queries(tm, queries, policy,
                   [&](Index i, Vector values, std::vector<Index>) { out[i] = values.mean(); });
  return out;
}

TwinPrediction twin_predict(const TwinModel& tm, const Eigen::Ref<const Eigen::RowVectorXd>& query,
                            const AnchorPolicy& policy) {
  Matrix q = query;
  return std::move(twin_predict_batch(tm, q, policy).front());
}

// ---------------------------------------------------------------------------

AnchoredPredictor::AnchoredPredictor(ModelPtr base, Eigen::RowVectorXd anchor_features,
                                     double anchor_target, bool augment)
    : base_(std::move(base)), anchor_x_(std::move(anchor_features)), anchor_y_(anchor_target),
      augment_(augment) {}

Vector AnchoredPredictor::predict(const Matrix& x) const {
  if (x.cols() != anchor_x_.size()) throw std::invalid_argument("anchored predictor: width mismatch");
  const Matrix right = anchor_x_.replicate(x.rows(), 1);
  return (base_->predict(make_pair_features(x, right, augment_)).array() + anchor_y_).matrix();
}

double AnchoredPredictor::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return predict(Matrix(x))[0];
}

AnchoredPredictor materialize_anchored_predictor(const TwinModel& tm, Index anchor_index) {
  if (anchor_index < 0 || anchor_index >= tm.anchor_count()) {
    throw std::invalid_argument("materialize_anchored_predictor: anchor index " +
                                std::to_string(anchor_index) + " out of range");
  }
  return AnchoredPredictor(tm.base, tm.anchors.features.row(anchor_index),
                           tm.anchors.targets[anchor_index], tm.augment);
}

double loop_violation(const TwinModel& tm, const Eigen::Ref<const Eigen::RowVectorXd>& x1,
                      const Eigen::Ref<const Eigen::RowVectorXd>& x2,
                      const Eigen::Ref<const Eigen::RowVectorXd>& x3) {
  Matrix left(3, x1.size());
  Matrix right(3, x1.size());
  left << x1, x2, x3;
  right << x2, x3, x1;
  return pair_predict(tm, left, right).sum();
}

// ---------------------------------------------------------------------------

TwinGridSearchResult twin_grid_search_cv(const LearnerConfig& forest_config, const Dataset& train,
                                         const PairingStrategy& strategy, std::uint64_t seed) {
  if (forest_config.kind != LearnerKind::random_forest) {
    throw std::invalid_argument("twin_grid_search_cv: learner must be a random forest");
  }
  if (train.rows() < forest_config.grid.cv_folds) {
    throw std::invalid_argument("twin_grid_search_cv: fewer rows than folds");
  }

  // Pairs per fold depend only on the fold, not on the candidate.
  struct FoldCache {
    std::vector<Index> rows;
    Dataset fold_train;
    Dataset fold_test;
    PairedDataset pairs;
  };
  std::vector<FoldCache> cache;

  TwinGridSearchResult result;
  result.selection = select_by_cv(
      forest_config.grid, train.rows(), seed,
      [&](const ForestParams& p, const std::vector<Index>& tr, const std::vector<Index>& te,
          std::uint64_t fold_seed) {
        auto it = std::find_if(cache.begin(), cache.end(), [&](const FoldCache& c) { return c.rows == tr; });
        if (it == cache.end()) {
          FoldCache c;
          c.rows = tr;
          c.fold_train = train.subset(tr);
          c.fold_test = train.subset(te);
          c.pairs = build_pairs(c.fold_train, strategy, fold_seed);
          cache.push_back(std::move(c));
          it = std::prev(cache.end());
        }
        auto forest = train_forest(p, it->pairs.pair_features, it->pairs.pair_targets, fold_seed);
        const TwinModel tm = make_twin_model(std::move(forest), it->fold_train, strategy.augment);
        return rmse(twin_predict_values(tm, it->fold_test.features, AnchorPolicy::all()),
                    it->fold_test.targets);
      });

  LearnerConfig best = forest_config;
  best.forest = result.selection.best;
  result.model = twin_fit(best, train, strategy, std::nullopt, seed);
  return result;
}

// ---------------------------------------------------------------------------

void save_twin(const TwinModel& tm, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "twinreg-twin";
  j["version"] = kModelFormatVersion;
  j["augment"] = tm.augment;
  j["feature_count"] = tm.feature_count();
  j["base"] = model_to_json(*tm.base);
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < tm.anchor_count(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(tm.feature_count() + 1));
    for (Index c = 0; c < tm.feature_count(); ++c) row[static_cast<std::size_t>(c)] = tm.anchors.features(r, c);
    row.back() = tm.anchors.targets[r];
    rows.push_back(std::move(row));
  }
  j["anchors"] = std::move(rows);
  if (tm.input_scaler) {
    const auto& s = *tm.input_scaler;
    j["scaler"] = {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                   {"stddev", std::vector<double>(s.stddev.data(), s.stddev.data() + s.stddev.size())}};
  }
  write_file_atomic(path, j.dump());
}

TwinModel load_twin(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open twin model file '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "twinreg-twin") throw std::runtime_error("twin file: bad format tag");
  if (j.at("version").get<int>() != kModelFormatVersion) {
    throw std::runtime_error("twin file: unsupported version");
  }
  const Index f = j.at("feature_count").get<Index>();
  const auto& rows = j.at("anchors");
  Matrix x(static_cast<Index>(rows.size()), f);
  Vector y(static_cast<Index>(rows.size()));
  for (Index r = 0; r < x.rows(); ++r) {
    const auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Index>(row.size()) != f + 1) throw std::runtime_error("twin file: ragged anchor row");
    for (Index c = 0; c < f; ++c) x(r, c) = row[static_cast<std::size_t>(c)];
    y[r] = row.back();
  }
  TwinModel tm = make_twin_model(model_from_json(j.at("base")), Dataset(std::move(x), std::move(y)),
                                 j.at("augment").get<bool>());
  if (j.contains("scaler")) {
    Scaler s;
    const auto mean = j["scaler"].at("mean").get<std::vector<double>>();
    const auto sd = j["scaler"].at("stddev").get<std::vector<double>>();
    s.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size()));
    s.stddev = Eigen::Map<const Vector>(sd.data(), static_cast<Index>(sd.size()));
    tm.input_scaler = std::move(s);
  }
  return tm;
}

}  // namespace twinreg
