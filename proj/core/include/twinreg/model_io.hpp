#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "twinreg/learner.hpp"

namespace twinreg {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON envelope: {"format": "twinreg-model", "version": 1, "kind": ..., ...}.
nlohmann::json model_to_json(const Model& m);
ModelPtr model_from_json(const nlohmann::json& j);

void save_model(const Model& m, const std::filesystem::path& path);
ModelPtr load_model(const std::filesystem::path& path);

/// Writes `text` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace twinreg
