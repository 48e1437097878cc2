#include "twinreg/storage.hpp"

#include <stdexcept>

namespace twinreg {

nlohmann::json StorageReport::to_json() const {
  nlohmann::json j;
  j["feature_count"] = feature_count;
  j["hidden"] = hidden;
  j["augment"] = augment;
  j["plain_parameters"] = plain_parameters;
  j["twin_parameters"] = twin_parameters;
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back({{"ensemble_size", r.ensemble_size}, {"ann", r.ann}, {"tnnr", r.tnnr}});
  j["rows"] = std::move(arr);
  j["crossover"] = crossover ? nlohmann::json(*crossover) : nlohmann::json(nullptr);
  return j;
}

std::optional<Index> storage_crossover(Index f, const std::vector<Index>& hidden, bool augment) {
  if (f < 1) throw std::invalid_argument("storage: feature count must be >= 1");
  const auto plain = count_parameters(MlpRole::plain, f, hidden, augment);
  const auto twin = count_parameters(MlpRole::twin, f, hidden, augment);
  const auto anchor = static_cast<std::size_t>(f + 1);
  // twin + E * anchor < E * plain  <=>  E > twin / (plain - anchor)
  if (plain <= anchor) return std::nullopt;
  return static_cast<Index>(twin / (plain - anchor) + 1);
}

StorageReport storage_report(Index f, const std::vector<Index>& ensemble_sizes,
                             const std::vector<Index>& hidden, bool augment) {
  if (f < 1) throw std::invalid_argument("storage: feature count must be >= 1");
  StorageReport rep;
  rep.feature_count = f;
  rep.hidden = hidden;
  rep.augment = augment;
  rep.plain_parameters = count_parameters(MlpRole::plain, f, hidden, augment);
  rep.twin_parameters = count_parameters(MlpRole::twin, f, hidden, augment);
  for (Index e : ensemble_sizes) {
    if (e < 1) throw std::invalid_argument("storage: ensemble sizes must be >= 1");
    const auto n = static_cast<std::size_t>(e);
    rep.rows.push_back({e, n * rep.plain_parameters, rep.twin_parameters + n * static_cast<std::size_t>(f + 1)});
  }
  rep.crossover = storage_crossover(f, hidden, augment);
  return rep;
}

}  // namespace twinreg
