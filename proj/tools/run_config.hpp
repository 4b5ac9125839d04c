#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sparsecd/model.hpp"
#include "sparsecd/trainer.hpp"

namespace sparsecd::cli {

/// Model, training and path settings from one flat JSON object. `preset`
/// ("toy" or "full") is applied first; every other key overrides it.
struct RunConfig {
  std::string preset = "toy";
  ModelConfig model = ModelConfig::toy();
  TrainConfig train;
  bool seed_given = false;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> out;
  double val_fraction = 0.2;
};

/// Rejects unknown keys and type or range violations with ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Every key, fully resolved; parse_run_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& c);

/// One line per key: name, type, meaning.
std::string schema_help();

}  // namespace sparsecd::cli
