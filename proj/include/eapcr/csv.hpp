#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "eapcr/features.hpp"

namespace eapcr::io {

// Splits one CSV record; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_csv_line(std::string_view line, char delimiter = ',');

struct CsvOptions {
  // When false, absent or empty target cells load as NaN (prediction input).
  bool require_targets = true;
};

struct LoadedTable {
  features::RowTable rows;
  std::size_t missing_cells = 0;  // empty feature cells
};

// The header must contain every schema column (any order; extra columns are
// ignored). Categorical cells stay strings, numerical cells are parsed.
LoadedTable parse_csv(std::istream& in, const features::FeatureSchema& schema, const CsvOptions& options = {},
                      const std::string& source = "<stream>");
LoadedTable load_csv(const std::filesystem::path& path, const features::FeatureSchema& schema,
                     const CsvOptions& options = {});

}  // namespace eapcr::io
