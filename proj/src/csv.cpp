#include "eapcr/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>

#include "eapcr/error.hpp"

namespace eapcr::io {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_number(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == delimiter && !quoted) {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

LoadedTable parse_csv(std::istream& in, const features::FeatureSchema& schema, const CsvOptions& options,
                      const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file, expected a header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);

  std::vector<std::string> missing;
  std::vector<std::size_t> feature_pos, target_pos;
  for (const auto& col : schema.columns) {
    auto it = position.find(col.name);
    if (it == position.end()) {
      missing.push_back(col.name);
    } else {
      feature_pos.push_back(it->second);
    }
  }
  const std::size_t absent = std::numeric_limits<std::size_t>::max();
  for (const auto& t : schema.targets) {
    auto it = position.find(t);
    if (it == position.end()) {
      if (options.require_targets) missing.push_back(t);
      target_pos.push_back(absent);
    } else {
      target_pos.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw SchemaError(source + ": header is missing column(s): " + names);
  }

  LoadedTable out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(cells.size()));
    }
    features::RawRow row;
    row.features.resize(schema.n());
    for (std::size_t c = 0; c < schema.n(); ++c) {
      const std::string& cell = cells[feature_pos[c]];
      if (cell.empty()) {
        ++out.missing_cells;
        continue;  // stays monostate
      }
      if (schema.columns[c].kind == features::ColumnKind::Categorical) {
        row.features[c] = cell;
      } else if (auto v = parse_number(cell)) {
        row.features[c] = *v;
      } else {
        throw DataError(source + ":" + std::to_string(line_no) + ": column '" + schema.columns[c].name +
                        "' has unparseable number '" + cell + "'");
      }
    }
    for (std::size_t t = 0; t < schema.targets.size(); ++t) {
      const std::string empty;
      const std::string& cell = target_pos[t] == absent ? empty : cells[target_pos[t]];
      if (cell.empty()) {
        if (options.require_targets) {
          throw DataError(source + ":" + std::to_string(line_no) + ": target '" + schema.targets[t] + "' is empty");
        }
        row.targets.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      auto v = parse_number(cell);
      if (!v) {
        throw DataError(source + ":" + std::to_string(line_no) + ": target '" + schema.targets[t] +
                        "' has unparseable number '" + cell + "'");
      }
      row.targets.push_back(*v);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

LoadedTable load_csv(const std::filesystem::path& path, const features::FeatureSchema& schema,
                     const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, schema, options, path.string());
}

}  // namespace eapcr::io
