#include "eapcr/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "eapcr/error.hpp"

namespace eapcr::io {

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

bool is_integer_param(const std::string& p) {
  return p == "embed_size" || p == "n_bins" || p == "batch_size" || p == "max_epochs" || p == "patience";
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

// ---------------------------------------------------------------------------

features::FeatureSchema schema_from_json(const json& j) {
  features::FeatureSchema s;
  if (!j.contains("columns") || !j["columns"].is_array()) throw SchemaError("schema needs a 'columns' array");
  for (const auto& c : j["columns"]) {
    reject_unknown_keys(c, {"name", "kind", "n_bins"}, "schema column");
    features::ColumnSpec col;
    col.name = get_as<std::string>(c, "name", "schema column");
    const auto kind = get_as<std::string>(c, "kind", "schema column '" + col.name + "'");
    if (kind == "categorical") {
      col.kind = features::ColumnKind::Categorical;
    } else if (kind == "numerical") {
      col.kind = features::ColumnKind::Numerical;
      col.n_bins = c.contains("n_bins") ? get_as<int>(c, "n_bins", "schema column '" + col.name + "'") : 10;
    } else {
      throw SchemaError("column '" + col.name + "': kind must be 'categorical' or 'numerical', got '" + kind + "'");
    }
    s.columns.push_back(std::move(col));
  }
  if (!j.contains("targets") || !j["targets"].is_array()) throw SchemaError("schema needs a 'targets' array");
  s.targets = j["targets"].get<std::vector<std::string>>();
  s.validate();
  return s;
}

json schema_to_json(const features::FeatureSchema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns) {
    json col{{"name", c.name}};
    if (c.kind == features::ColumnKind::Categorical) {
      col["kind"] = "categorical";
    } else {
      col["kind"] = "numerical";
      col["n_bins"] = c.n_bins;
    }
    cols.push_back(std::move(col));
  }
  return json{{"columns", std::move(cols)}, {"targets", schema.targets}};
}

features::SplitSpec split_from_json(const json& j) {
  reject_unknown_keys(j, {"ratio", "k_fold"}, "split");
  if (j.contains("ratio") == j.contains("k_fold")) throw ConfigError("split needs exactly one of 'ratio' or 'k_fold'");
  if (j.contains("ratio")) return features::SplitSpec::holdout(get_as<double>(j, "ratio", "split"));
  return features::SplitSpec::kfold(get_as<int>(j, "k_fold", "split"));
}

json split_to_json(const features::SplitSpec& split) {
  if (split.kind == features::SplitSpec::Kind::Ratio) return json{{"ratio", split.ratio}};
  return json{{"k_fold", split.folds}};
}

SchemaFile schema_file_from_json(const json& j) {
  reject_unknown_keys(j, {"columns", "targets", "impute_k", "split"}, "schema file");
  SchemaFile f;
  try {
    f.schema = schema_from_json(j);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema: ") + e.what());
  }
  if (j.contains("impute_k")) f.impute_k = get_as<int>(j, "impute_k", "schema file");
  if (j.contains("split")) f.split = split_from_json(j["split"]);
  return f;
}

json schema_file_to_json(const SchemaFile& file) {
  json j = schema_to_json(file.schema);
  if (file.impute_k) j["impute_k"] = *file.impute_k;
  if (file.split) j["split"] = split_to_json(*file.split);
  return j;
}

SchemaFile load_schema_file(const std::filesystem::path& path) {
  try {
    return schema_file_from_json(read_json_file(path));
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(ridge_lambda >= 0.0)) throw ConfigError("ridge_lambda must be >= 0");
  if (n_bins && *n_bins < 1) throw ConfigError("n_bins must be >= 1");
  if (impute_k && *impute_k < 1) throw ConfigError("impute_k must be >= 1");
  if (model.embed_size < 1) throw ConfigError("embed_size must be >= 1");
  train.validate();
  std::set<std::string> axes;
  const auto& known = sweepable_parameters();
  for (const auto& axis : sweep) {
    if (std::find(known.begin(), known.end(), axis.param) == known.end()) {
      throw ConfigError("sweep axis '" + axis.param + "' does not name a sweepable config field");
    }
    if (!axes.insert(axis.param).second) throw ConfigError("sweep axis '" + axis.param + "' given twice");
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.param + "' has no values");
    std::set<double> distinct(axis.values.begin(), axis.values.end());
    if (distinct.size() != axis.values.size()) throw ConfigError("sweep axis '" + axis.param + "' repeats a value");
    for (double v : axis.values) {
      if (!std::isfinite(v) || v <= 0.0) {
        if (!(axis.param == "ridge_lambda" && v == 0.0)) {
          throw ConfigError("sweep axis '" + axis.param + "' needs positive values");
        }
      }
      if (is_integer_param(axis.param) && v != std::floor(v)) {
        throw ConfigError("sweep axis '" + axis.param + "' needs integer values");
      }
    }
  }
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown_keys(j,
                      {"data", "schema", "target", "split", "model", "train", "n_bins", "impute_k", "ridge_lambda",
                       "sweep", "seeds", "output_dir", "workers", "save_checkpoints"},
                      "config");
  ExperimentConfig c;
  const std::string where = "config";
  if (j.contains("data")) c.data_path = resolve(get_as<std::string>(j, "data", where), base_dir);
  if (j.contains("schema")) c.schema_path = resolve(get_as<std::string>(j, "schema", where), base_dir);
  if (j.contains("target")) c.target = get_as<std::string>(j, "target", where);
  if (j.contains("split")) c.split = split_from_json(j["split"]);
  if (j.contains("model")) {
    const json& m = j["model"];
    reject_unknown_keys(m, {"embed_size", "conv_channels", "mlp_hidden"}, "config.model");
    if (m.contains("embed_size")) c.model.embed_size = get_as<std::size_t>(m, "embed_size", "config.model");
    if (m.contains("conv_channels")) {
      const auto ch = get_as<std::vector<std::size_t>>(m, "conv_channels", "config.model");
      if (ch.size() != 2) throw ConfigError("config.model.conv_channels needs two entries");
      c.model.conv1_channels = ch[0];
      c.model.conv2_channels = ch[1];
    }
    if (m.contains("mlp_hidden")) c.model.mlp_hidden = get_as<std::vector<std::size_t>>(m, "mlp_hidden", "config.model");
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    const std::string tw = "config.train";
    reject_unknown_keys(t,
                        {"learning_rate", "batch_size", "max_epochs", "patience", "early_stopping",
                         "validation_fraction", "scale_targets"},
                        tw);
    if (t.contains("learning_rate")) c.train.learning_rate = get_as<double>(t, "learning_rate", tw);
    if (t.contains("batch_size")) c.train.batch_size = get_as<std::size_t>(t, "batch_size", tw);
    if (t.contains("max_epochs")) c.train.max_epochs = get_as<std::size_t>(t, "max_epochs", tw);
    if (t.contains("patience")) c.train.patience = get_as<std::size_t>(t, "patience", tw);
    if (t.contains("early_stopping")) c.train.early_stopping = get_as<bool>(t, "early_stopping", tw);
    if (t.contains("validation_fraction")) c.train.validation_fraction = get_as<double>(t, "validation_fraction", tw);
    if (t.contains("scale_targets")) c.train.scale_targets = get_as<bool>(t, "scale_targets", tw);
  }
  if (j.contains("n_bins")) c.n_bins = get_as<int>(j, "n_bins", where);
  if (j.contains("impute_k")) c.impute_k = get_as<int>(j, "impute_k", where);
  if (j.contains("ridge_lambda")) c.ridge_lambda = get_as<double>(j, "ridge_lambda", where);
  if (j.contains("sweep")) {
    if (!j["sweep"].is_array()) throw ConfigError("config.sweep must be an array");
    for (const auto& a : j["sweep"]) {
      reject_unknown_keys(a, {"param", "values"}, "config.sweep[]");
      c.sweep.push_back({get_as<std::string>(a, "param", "config.sweep[]"),
                         get_as<std::vector<double>>(a, "values", "config.sweep[]")});
    }
  }
  if (j.contains("seeds")) c.seeds = get_as<std::vector<std::uint64_t>>(j, "seeds", where);
  if (j.contains("output_dir")) c.output_dir = resolve(get_as<std::string>(j, "output_dir", where), base_dir);
  if (j.contains("workers")) c.workers = get_as<std::size_t>(j, "workers", where);
  if (j.contains("save_checkpoints")) c.save_checkpoints = get_as<bool>(j, "save_checkpoints", where);
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["data"] = c.data_path.generic_string();
  j["schema"] = c.schema_path.generic_string();
  j["target"] = c.target;
  if (c.split) j["split"] = split_to_json(*c.split);
  j["model"] = json{{"embed_size", c.model.embed_size},
                    {"conv_channels", {c.model.conv1_channels, c.model.conv2_channels}},
                    {"mlp_hidden", c.model.mlp_hidden}};
  j["train"] = json{{"learning_rate", c.train.learning_rate},
                    {"batch_size", c.train.batch_size},
                    {"max_epochs", c.train.max_epochs},
                    {"patience", c.train.patience},
                    {"early_stopping", c.train.early_stopping},
                    {"validation_fraction", c.train.validation_fraction},
                    {"scale_targets", c.train.scale_targets}};
  if (c.n_bins) j["n_bins"] = *c.n_bins;
  if (c.impute_k) j["impute_k"] = *c.impute_k;
  j["ridge_lambda"] = c.ridge_lambda;
  json axes = json::array();
  for (const auto& a : c.sweep) axes.push_back(json{{"param", a.param}, {"values", a.values}});
  j["sweep"] = std::move(axes);
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.generic_string();
  j["workers"] = c.workers;
  j["save_checkpoints"] = c.save_checkpoints;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------

std::vector<Assignment> sweep_grid(const std::vector<SweepAxis>& axes) {
  std::vector<Assignment> grid{Assignment{}};
  for (const auto& axis : axes) {
    std::vector<double> values = axis.values;
    std::sort(values.begin(), values.end());
    std::vector<Assignment> next;
    for (const auto& partial : grid) {
      for (double v : values) {
        Assignment a = partial;
        a[axis.param] = v;
        next.push_back(std::move(a));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

ExperimentConfig apply_assignment(const ExperimentConfig& base, const Assignment& cell) {
  ExperimentConfig c = base;
  c.sweep.clear();
  for (const auto& [param, value] : cell) {
    const auto as_size = static_cast<std::size_t>(value);
    if (param == "embed_size") {
      c.model.embed_size = as_size;
    } else if (param == "n_bins") {
      c.n_bins = static_cast<int>(value);
    } else if (param == "learning_rate") {
      c.train.learning_rate = value;
    } else if (param == "batch_size") {
      c.train.batch_size = as_size;
    } else if (param == "max_epochs") {
      c.train.max_epochs = as_size;
    } else if (param == "patience") {
      c.train.patience = as_size;
    } else if (param == "ridge_lambda") {
      c.ridge_lambda = value;
    } else {
      throw ConfigError("unknown sweep parameter '" + param + "'");
    }
  }
  c.validate();
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  json j = config_to_json(config);
  // where results land does not change what they are
  j.erase("output_dir");
  j.erase("workers");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace eapcr::io
