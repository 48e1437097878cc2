#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinreg/learner.hpp"

namespace twinreg {

struct StorageRow {
  Index ensemble_size = 1;
  std::size_t ann = 0;   // E independent plain networks
  std::size_t tnnr = 0;  // one twin network plus E anchors of f + 1 numbers
};

struct StorageReport {
  Index feature_count = 0;
  std::vector<Index> hidden;
  bool augment = false;
  std::size_t plain_parameters = 0;
  std::size_t twin_parameters = 0;
  std::vector<StorageRow> rows;
  // Smallest ensemble size at which the twin ensemble is strictly cheaper.
  std::optional<Index> crossover;

  nlohmann::json to_json() const;
};

StorageReport storage_report(Index f, const std::vector<Index>& ensemble_sizes,
                             const std::vector<Index>& hidden = {128, 128}, bool augment = false);

std::optional<Index> storage_crossover(Index f, const std::vector<Index>& hidden = {128, 128},
                                       bool augment = false);

}  // namespace twinreg
