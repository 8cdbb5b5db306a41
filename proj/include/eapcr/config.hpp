#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eapcr/features.hpp"
#include "eapcr/model.hpp"
#include "eapcr/trainer.hpp"

namespace eapcr::io {

using json = nlohmann::json;

// Per-dataset schema file:
//   {
//     "columns": [{"name": "Dopant", "kind": "categorical"},
//                 {"name": "pH", "kind": "numerical", "n_bins": 5}],
//     "targets": ["Degradation rate"],
//     "impute_k": 5,                  optional, enables kNN imputation
//     "split": {"ratio": 0.7}         optional default, or {"k_fold": 5}
//   }
struct SchemaFile {
  features::FeatureSchema schema;
  std::optional<int> impute_k;
  std::optional<features::SplitSpec> split;
};

features::FeatureSchema schema_from_json(const json& j);
json schema_to_json(const features::FeatureSchema& schema);
SchemaFile schema_file_from_json(const json& j);
json schema_file_to_json(const SchemaFile& file);
SchemaFile load_schema_file(const std::filesystem::path& path);

features::SplitSpec split_from_json(const json& j);
json split_to_json(const features::SplitSpec& split);

// Parameters a sweep axis may vary.
inline const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> names{"embed_size", "n_bins",   "learning_rate", "batch_size",
                                              "max_epochs", "patience", "ridge_lambda"};
  return names;
}

struct SweepAxis {
  std::string param;
  std::vector<double> values;
};

struct ExperimentConfig {
  std::filesystem::path data_path;
  std::filesystem::path schema_path;
  std::string target;  // empty: first target in the schema
  std::optional<features::SplitSpec> split;  // falls back to the schema file, then holdout 0.7
  model::ModelConfig model;                  // cardinalities are filled per split
  train::TrainConfig train;
  std::optional<int> n_bins;  // overrides every numerical column when set
  std::optional<int> impute_k;
  double ridge_lambda = 1e-3;
  std::vector<SweepAxis> sweep;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output_dir = "runs";
  std::size_t workers = 1;
  bool save_checkpoints = true;

  void validate() const;
};

// Relative paths in the file resolve against `base_dir`.
ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {});
json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

using Assignment = std::map<std::string, double>;

// Cartesian product of the axes, each axis ascending; a single empty
// assignment when there are no axes.
std::vector<Assignment> sweep_grid(const std::vector<SweepAxis>& axes);

// Copy of `base` with one grid cell applied (sweep axes cleared).
ExperimentConfig apply_assignment(const ExperimentConfig& base, const Assignment& cell);

std::uint64_t fnv1a64(std::string_view bytes);
std::string config_hash(const ExperimentConfig& config);

}  // namespace eapcr::io
