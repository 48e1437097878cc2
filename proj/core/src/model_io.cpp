#include "twinreg/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "twinreg/forest.hpp"
#include "twinreg/knn.hpp"
#include "twinreg/mlp.hpp"

namespace twinreg {

namespace {

nlohmann::json envelope(LearnerKind kind) {
  return {{"format", "twinreg-model"}, {"version", kModelFormatVersion}, {"kind", to_string(kind)}};
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

nlohmann::json matrix_rows(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_rows(const nlohmann::json& rows, Index cols) {
  Matrix m(static_cast<Index>(rows.size()), cols);
  for (Index r = 0; r < m.rows(); ++r) {
    const auto& row = rows.at(static_cast<std::size_t>(r));
    if (static_cast<Index>(row.size()) != cols) throw std::runtime_error("model file: ragged matrix");
    for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

nlohmann::json forest_params_json(const ForestParams& p) {
  return {{"n_estimators", p.n_estimators}, {"max_depth", p.max_depth},
          {"max_features", p.max_features}, {"min_samples_leaf", p.min_samples_leaf},
          {"min_samples_split", p.min_samples_split}, {"bootstrap", p.bootstrap}};
}

ForestParams forest_params_from(const nlohmann::json& j) {
  ForestParams p;
  p.n_estimators = j.at("n_estimators").get<Index>();
  p.max_depth = j.at("max_depth").get<Index>();
  p.max_features = j.at("max_features").get<double>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<Index>();
  p.min_samples_split = j.at("min_samples_split").get<Index>();
  p.bootstrap = j.at("bootstrap").get<bool>();
  return p;
}

}  // namespace

nlohmann::json ConstantModel::to_json() const {
  auto j = envelope(kind());
  j["width"] = width_;
  j["value"] = value_;
  return j;
}

nlohmann::json MlpModel::to_json() const {
  auto j = envelope(kind());
  j["widths"] = net_.widths();
  j["activation"] = net_.activation() == Activation::relu ? "relu" : "tanh";
  j["target_mean"] = target_mean_;
  j["target_scale"] = target_scale_;
  j["parameters"] = to_std(net_.parameters());
  return j;
}

nlohmann::json ForestModel::to_json() const {
  auto j = envelope(kind());
  j["width"] = width_;
  j["params"] = forest_params_json(params_);
  auto trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& nd : t.nodes) {
      feature.push_back(nd.feature);
      threshold.push_back(nd.threshold);
      left.push_back(nd.left);
      right.push_back(nd.right);
      value.push_back(nd.value);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                     {"right", right}, {"value", value}});
  }
  j["trees"] = std::move(trees);
  return j;
}

nlohmann::json KnnModel::to_json() const {
  auto j = envelope(kind());
  j["k"] = k_;
  j["width"] = features_.cols();
  j["features"] = matrix_rows(features_);
  j["targets"] = to_std(targets_);
  return j;
}

nlohmann::json model_to_json(const Model& m) { return m.to_json(); }

ModelPtr model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "twinreg-model") throw std::runtime_error("model file: bad format tag");
  const int version = j.at("version").get<int>();
  if (version != kModelFormatVersion) {
    throw std::runtime_error("model file: unsupported version " + std::to_string(version));
  }
  switch (learner_kind_from_string(j.at("kind").get<std::string>())) {
    case LearnerKind::constant:
      return std::make_shared<const ConstantModel>(j.at("width").get<Index>(),
                                                   j.at("value").get<double>());
    case LearnerKind::mlp: {
      const auto widths = j.at("widths").get<std::vector<Index>>();
      if (widths.size() < 2 || widths.back() != 1) throw std::runtime_error("model file: bad widths");
      const std::vector<Index> hidden(widths.begin() + 1, widths.end() - 1);
      const Activation act =
          j.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::tanh;
      MlpNetwork net(widths.front(), hidden, act);
      const auto params = j.at("parameters").get<std::vector<double>>();
      if (static_cast<Index>(params.size()) != net.parameters().size()) {
        throw std::runtime_error("model file: parameter count does not match widths");
      }
      net.parameters() = from_std(params);
      return std::make_shared<const MlpModel>(std::move(net), j.at("target_mean").get<double>(),
                                              j.at("target_scale").get<double>());
    }
    case LearnerKind::random_forest: {
      std::vector<RegressionTree> trees;
      for (const auto& jt : j.at("trees")) {
        const auto feature = jt.at("feature").get<std::vector<int>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<int>>();
        const auto right = jt.at("right").get<std::vector<int>>();
        const auto value = jt.at("value").get<std::vector<double>>();
        RegressionTree t;
        for (std::size_t k = 0; k < feature.size(); ++k) {
          t.nodes.push_back({feature.at(k), threshold.at(k), left.at(k), right.at(k), value.at(k)});
        }
        trees.push_back(std::move(t));
      }
      return std::make_shared<const ForestModel>(j.at("width").get<Index>(),
                                                 forest_params_from(j.at("params")), std::move(trees));
    }
    case LearnerKind::knn: {
      const Index width = j.at("width").get<Index>();
      return std::make_shared<const KnnModel>(matrix_from_rows(j.at("features"), width),
                                              from_std(j.at("targets").get<std::vector<double>>()),
                                              j.at("k").get<Index>());
    }
  }
  throw std::runtime_error("model file: unknown kind");
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const Model& m, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(m).dump());
}

ModelPtr load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path.string() + "'");
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace twinreg
