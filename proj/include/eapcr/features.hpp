#pragma once

// Raw heterogeneous rows -> fixed-length integer index vectors.
//
// Categorical columns go through a per-column dictionary (index 0 is reserved
// for values never seen during fitting). Numerical columns are discretized at
// equal-frequency quantile edges. Both are fitted on training rows only and
// are immutable afterwards.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace eapcr::features {

enum class ColumnKind { Categorical, Numerical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Categorical;
  int n_bins = 0;  // numerical columns only
};

struct FeatureSchema {
  std::vector<ColumnSpec> columns;
  std::vector<std::string> targets;

  std::size_t n() const { return columns.size(); }
  std::optional<std::size_t> column_index(const std::string& name) const;
  std::optional<std::size_t> target_index(const std::string& name) const;

  // Unique names, targets disjoint from features, N >= 2, n_bins >= 1 for
  // numerical columns. Throws SchemaError.
  void validate() const;
};

// A raw cell: missing, a parsed number, or a categorical string.
using Value = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Value& v) { return std::holds_alternative<std::monostate>(v); }

struct RawRow {
  std::vector<Value> features;  // schema column order
  std::vector<double> targets;  // schema target order
};

using RowTable = std::vector<RawRow>;

// ---- vocabulary ----

class ColumnVocab {
 public:
  ColumnVocab() = default;
  // `sorted_values` must be strictly increasing; value i gets index i + 1.
  ColumnVocab(std::vector<std::string> sorted_values, std::vector<std::size_t> counts);

  std::size_t lookup(const std::string& value) const;  // 0 when unseen
  std::size_t cardinality() const { return values_.size() + 1; }
  const std::vector<std::string>& values() const { return values_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  bool operator==(const ColumnVocab&) const = default;

 private:
  std::vector<std::string> values_;
  std::vector<std::size_t> counts_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Vocabulary {
  // One entry per schema column; numerical columns hold an empty vocab.
  std::vector<ColumnVocab> columns;

  static constexpr std::size_t kUnknown = 0;
  std::size_t lookup(std::size_t column, const std::string& value) const;
  bool operator==(const Vocabulary&) const = default;
};

Vocabulary fit_vocab(const RowTable& rows, const FeatureSchema& schema);

// ---- equal-frequency discretization ----

struct Discretizer {
  int requested_bins = 0;
  std::vector<double> edges;  // strictly increasing after duplicate collapse

  std::size_t effective_bins() const { return edges.size() + 1; }
  // Value <= edges[k] lands in bin k; above every edge lands in the last bin.
  std::size_t bin(double value) const;
  bool operator==(const Discretizer&) const = default;
};

// Empirical quantiles at k/n_bins with linear interpolation between order
// statistics (position q*(n-1) in the sorted sample).
Discretizer fit_discretizer(std::span<const double> values, int n_bins);

// ---- encoding ----

struct EncodedRow {
  std::vector<std::size_t> indices;  // per-column local index, length N
};

struct FittedPipeline {
  FeatureSchema schema;
  Vocabulary vocab;
  std::vector<std::optional<Discretizer>> discretizers;  // set for numerical columns

  // Per-column embedding index space size.
  std::vector<std::size_t> cardinalities() const;
};

FittedPipeline fit_pipeline(const RowTable& rows, const FeatureSchema& schema);

// `row_number` only labels diagnostics.
EncodedRow transform_row(const RawRow& row, const FeatureSchema& schema, const Vocabulary& vocab,
                         const std::vector<std::optional<Discretizer>>& discretizers,
                         std::size_t row_number = 0);
EncodedRow transform_row(const RawRow& row, const FittedPipeline& pipeline, std::size_t row_number = 0);
std::vector<EncodedRow> transform_rows(const RowTable& rows, const FittedPipeline& pipeline);

// ---- imputation ----

struct ImputeReport {
  std::size_t rows_imputed = 0;
  std::size_t cells_imputed = 0;
};

// Fills missing numerical cells with the mean of the k nearest complete rows.
// Distance is Euclidean over z-scored numerical columns that are present in
// the incomplete row; ties keep row order.
RowTable knn_impute(const RowTable& rows, const FeatureSchema& schema, int k, ImputeReport* report = nullptr);

// ---- splitting ----

struct SplitSpec {
  enum class Kind { Ratio, KFold };
  Kind kind = Kind::Ratio;
  double ratio = 0.7;  // train fraction
  int folds = 5;

  static SplitSpec holdout(double train_fraction) { return {Kind::Ratio, train_fraction, 0}; }
  static SplitSpec kfold(int k) { return {Kind::KFold, 0.0, k}; }
  std::string describe() const;
  bool operator==(const SplitSpec&) const = default;
};

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded uniform shuffle then contiguous slicing. Ratio splits yield one
// partition; k-fold yields k whose test sets partition the rows.
std::vector<Partition> split_dataset(std::size_t n_rows, const SplitSpec& spec, std::uint64_t seed);

RowTable select_rows(const RowTable& rows, std::span<const std::size_t> indices);

}  // namespace eapcr::features
