#include "eapcr/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "eapcr/error.hpp"

namespace eapcr::features {

std::optional<std::size_t> FeatureSchema::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> FeatureSchema::target_index(const std::string& name) const {
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (targets[i] == name) return i;
  return std::nullopt;
}

void FeatureSchema::validate() const {
  if (columns.size() < 2) {
    throw SchemaError("schema needs at least 2 feature columns, got " + std::to_string(columns.size()));
  }
  if (targets.empty()) throw SchemaError("schema declares no target column");
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) throw SchemaError("empty column name");
    if (!seen.insert(c.name).second) throw SchemaError("duplicate column name '" + c.name + "'");
    if (c.kind == ColumnKind::Numerical && c.n_bins < 1) {
      throw SchemaError("numerical column '" + c.name + "' needs n_bins >= 1");
    }
  }
  std::set<std::string> seen_targets;
  for (const auto& t : targets) {
    if (seen.count(t)) throw SchemaError("column '" + t + "' is both a feature and a target");
    if (!seen_targets.insert(t).second) throw SchemaError("duplicate target '" + t + "'");
  }
}

// ---------------------------------------------------------------------------

ColumnVocab::ColumnVocab(std::vector<std::string> sorted_values, std::vector<std::size_t> counts)
    : values_(std::move(sorted_values)), counts_(std::move(counts)) {
  if (counts_.size() != values_.size()) throw FitError("vocabulary counts do not match values");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (i > 0 && !(values_[i - 1] < values_[i])) throw FitError("vocabulary values must be sorted and unique");
    index_.emplace(values_[i], i + 1);
  }
}

std::size_t ColumnVocab::lookup(const std::string& value) const {
  auto it = index_.find(value);
  return it == index_.end() ? Vocabulary::kUnknown : it->second;
}

std::size_t Vocabulary::lookup(std::size_t column, const std::string& value) const {
  return columns.at(column).lookup(value);
}

Vocabulary fit_vocab(const RowTable& rows, const FeatureSchema& schema) {
  if (rows.empty()) throw FitError("cannot fit a vocabulary on zero rows");
  Vocabulary vocab;
  vocab.columns.resize(schema.n());
  for (std::size_t c = 0; c < schema.n(); ++c) {
    if (schema.columns[c].kind != ColumnKind::Categorical) continue;
    std::map<std::string, std::size_t> counts;  // ordered: lexicographic assignment
    for (const auto& row : rows) {
      if (const auto* s = std::get_if<std::string>(&row.features.at(c))) ++counts[*s];
    }
    std::vector<std::string> values;
    std::vector<std::size_t> n;
    for (const auto& [v, k] : counts) {
      values.push_back(v);
      n.push_back(k);
    }
    vocab.columns[c] = ColumnVocab(std::move(values), std::move(n));
  }
  return vocab;
}

// ---------------------------------------------------------------------------

std::size_t Discretizer::bin(double value) const {
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
}

Discretizer fit_discretizer(std::span<const double> values, int n_bins) {
  if (n_bins < 1) throw FitError("n_bins must be >= 1");
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) sorted.push_back(v);
  }
  if (sorted.size() < static_cast<std::size_t>(n_bins)) {
    throw FitError("equal-frequency binning needs at least " + std::to_string(n_bins) + " finite values, got " +
                   std::to_string(sorted.size()));
  }
  std::sort(sorted.begin(), sorted.end());

  Discretizer d;
  d.requested_bins = n_bins;
  const double last = static_cast<double>(sorted.size() - 1);
  for (int k = 1; k < n_bins; ++k) {
    const double pos = last * static_cast<double>(k) / static_cast<double>(n_bins);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    const double edge = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    if (d.edges.empty() || edge > d.edges.back()) d.edges.push_back(edge);
  }
  return d;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FittedPipeline::cardinalities() const {
  std::vector<std::size_t> out(schema.n());
  for (std::size_t c = 0; c < schema.n(); ++c) {
    out[c] = schema.columns[c].kind == ColumnKind::Categorical ? vocab.columns.at(c).cardinality()
                                                               : discretizers.at(c)->effective_bins();
  }
  return out;
}

FittedPipeline fit_pipeline(const RowTable& rows, const FeatureSchema& schema) {
  schema.validate();
  FittedPipeline p;
  p.schema = schema;
  p.vocab = fit_vocab(rows, schema);
  p.discretizers.resize(schema.n());
  for (std::size_t c = 0; c < schema.n(); ++c) {
    if (schema.columns[c].kind != ColumnKind::Numerical) continue;
    std::vector<double> values;
    values.reserve(rows.size());
    for (const auto& row : rows) {
      if (const auto* v = std::get_if<double>(&row.features.at(c))) values.push_back(*v);
    }
    try {
      p.discretizers[c] = fit_discretizer(values, schema.columns[c].n_bins);
    } catch (const FitError& e) {
      throw FitError("column '" + schema.columns[c].name + "': " + e.what());
    }
  }
  return p;
}

EncodedRow transform_row(const RawRow& row, const FeatureSchema& schema, const Vocabulary& vocab,
                         const std::vector<std::optional<Discretizer>>& discretizers, std::size_t row_number) {
  if (row.features.size() != schema.n()) {
    throw DataError("row " + std::to_string(row_number) + " has " + std::to_string(row.features.size()) +
                    " feature cells, schema expects " + std::to_string(schema.n()));
  }
  EncodedRow out;
  out.indices.resize(schema.n());
  for (std::size_t c = 0; c < schema.n(); ++c) {
    const Value& cell = row.features[c];
    const ColumnSpec& col = schema.columns[c];
    if (is_missing(cell)) {
      throw DataError("missing value at row " + std::to_string(row_number) + ", column '" + col.name +
                      "' (enable imputation or clean the data)");
    }
    if (col.kind == ColumnKind::Categorical) {
      const auto* s = std::get_if<std::string>(&cell);
      if (!s) throw DataError("row " + std::to_string(row_number) + ", column '" + col.name + "': expected a category");
      out.indices[c] = vocab.lookup(c, *s);
    } else {
      const auto* v = std::get_if<double>(&cell);
      if (!v) throw DataError("row " + std::to_string(row_number) + ", column '" + col.name + "': expected a number");
      const auto& disc = discretizers.at(c);
      if (!disc) throw StateError("column '" + col.name + "' has no fitted discretizer");
      out.indices[c] = disc->bin(*v);
    }
  }
  return out;
}

EncodedRow transform_row(const RawRow& row, const FittedPipeline& pipeline, std::size_t row_number) {
  return transform_row(row, pipeline.schema, pipeline.vocab, pipeline.discretizers, row_number);
}

std::vector<EncodedRow> transform_rows(const RowTable& rows, const FittedPipeline& pipeline) {
  std::vector<EncodedRow> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(transform_row(rows[i], pipeline, i));
  return out;
}

// ---------------------------------------------------------------------------

RowTable knn_impute(const RowTable& rows, const FeatureSchema& schema, int k, ImputeReport* report) {
  if (k < 1) throw ConfigError("knn_impute: k must be positive");
  std::vector<std::size_t> numeric;
  for (std::size_t c = 0; c < schema.n(); ++c)
    if (schema.columns[c].kind == ColumnKind::Numerical) numeric.push_back(c);

  auto value_of = [](const RawRow& r, std::size_t c) -> std::optional<double> {
    if (const auto* v = std::get_if<double>(&r.features.at(c))) return *v;
    return std::nullopt;
  };

  // z-score statistics over observed values
  std::vector<double> mu(schema.n(), 0.0), sd(schema.n(), 1.0);
  for (std::size_t c : numeric) {
    double s = 0.0, s2 = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (auto v = value_of(r, c)) {
        s += *v;
        ++n;
      }
    }
    if (n == 0) continue;
    mu[c] = s / static_cast<double>(n);
    for (const auto& r : rows) {
      if (auto v = value_of(r, c)) s2 += (*v - mu[c]) * (*v - mu[c]);
    }
    const double var = s2 / static_cast<double>(n);
    sd[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }

  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool complete = std::all_of(numeric.begin(), numeric.end(), [&](std::size_t c) { return value_of(rows[i], c).has_value(); });
    if (complete) donors.push_back(i);
  }

  RowTable out = rows;
  ImputeReport rep;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::size_t> holes, present;
    for (std::size_t c : numeric) (value_of(rows[i], c) ? present : holes).push_back(c);
    if (holes.empty()) continue;
    if (donors.size() < static_cast<std::size_t>(k)) {
      throw ImputationError("row " + std::to_string(i) + " needs " + std::to_string(k) + " complete neighbor rows, only " +
                            std::to_string(donors.size()) + " exist");
    }
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(donors.size());
    for (std::size_t j : donors) {
      double d2 = 0.0;
      for (std::size_t c : present) {
        const double diff = (*value_of(rows[i], c) - *value_of(rows[j], c)) / sd[c];
        d2 += diff * diff;
      }
      dist.emplace_back(std::sqrt(d2), j);
    }
    std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t c : holes) {
      double acc = 0.0;
      for (int n = 0; n < k; ++n) acc += *value_of(rows[dist[n].second], c);
      out[i].features[c] = acc / static_cast<double>(k);
      ++rep.cells_imputed;
    }
    ++rep.rows_imputed;
  }
  if (report) *report = rep;
  return out;
}

// ---------------------------------------------------------------------------

std::string SplitSpec::describe() const {
  std::ostringstream os;
  if (kind == Kind::Ratio) {
    os << "holdout:" << ratio;
  } else {
    os << "kfold:" << folds;
  }
  return os.str();
}

std::vector<Partition> split_dataset(std::size_t n_rows, const SplitSpec& spec, std::uint64_t seed) {
  if (n_rows < 2) throw ConfigError("splitting needs at least 2 rows, got " + std::to_string(n_rows));
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Partition> out;
  if (spec.kind == SplitSpec::Kind::Ratio) {
    if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) {
      throw ConfigError("train ratio must lie in (0, 1), got " + std::to_string(spec.ratio));
    }
    const auto n_train = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(n_rows)));
    if (n_train < 1 || n_train >= n_rows) {
      throw ConfigError("train ratio " + std::to_string(spec.ratio) + " leaves an empty side for " +
                        std::to_string(n_rows) + " rows");
    }
    Partition p;
    p.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    p.test.assign(order.begin() + static_cast<long>(n_train), order.end());
    out.push_back(std::move(p));
    return out;
  }

  if (spec.folds < 2) throw ConfigError("k-fold needs k >= 2, got " + std::to_string(spec.folds));
  const auto k = static_cast<std::size_t>(spec.folds);
  if (n_rows < k) {
    throw ConfigError(std::to_string(k) + "-fold split needs at least " + std::to_string(k) + " rows, got " +
                      std::to_string(n_rows));
  }
  const std::size_t base = n_rows / k, extra = n_rows % k;
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    Partition p;
    p.test.assign(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(start + len));
    p.train.assign(order.begin(), order.begin() + static_cast<long>(start));
    p.train.insert(p.train.end(), order.begin() + static_cast<long>(start + len), order.end());
    out.push_back(std::move(p));
    start += len;
  }
  return out;
}

RowTable select_rows(const RowTable& rows, std::span<const std::size_t> indices) {
  RowTable out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(rows.at(i));
  return out;
}

}  // namespace eapcr::features
