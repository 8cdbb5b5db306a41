#include "eapcr/permutation.hpp"

#include <algorithm>
#include <string>

#include "eapcr/error.hpp"

namespace eapcr::model {

bool PermutationSpec::degenerate() const {
  for (std::size_t i = 0; i < sequence.size(); ++i)
    if (sequence[i] != i + 1) return false;
  return true;
}

std::vector<std::size_t> PermutationSpec::inverse_sequence() const {
  std::vector<std::size_t> inv(sequence.size());
  for (std::size_t i = 0; i < sequence.size(); ++i) inv[sequence[i] - 1] = i + 1;
  return inv;
}

PermutationSpec permutation_from_sequence(std::vector<std::size_t> sequence) {
  const std::size_t n = sequence.size();
  std::vector<bool> seen(n, false);
  for (std::size_t s : sequence) {
    if (s < 1 || s > n || seen[s - 1]) throw ConfigError("sequence is not a permutation of 1.." + std::to_string(n));
    seen[s - 1] = true;
  }
  PermutationSpec spec;
  spec.n = n;
  spec.rows = 1;
  spec.cols = n;
  spec.matrix.assign(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i) spec.matrix[i][sequence[i] - 1] = 1;
  spec.sequence = std::move(sequence);
  return spec;
}

PermutationSpec build_permutation(std::size_t n) {
  if (n < 2) throw ConfigError("permutation needs N >= 2, got " + std::to_string(n));

  std::size_t cols = 1;
  while (cols * cols < n) ++cols;  // ceil(sqrt(n)) without floating point
  const std::size_t rows = (n + cols - 1) / cols;

  // Row-major fill; cells past n stay 0 (sentinel).
  std::vector<std::size_t> grid(rows * cols, 0);
  for (std::size_t v = 1; v <= n; ++v) grid[v - 1] = v;

  std::vector<std::size_t> sequence;
  sequence.reserve(n);
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r)
      if (const std::size_t v = grid[r * cols + c]; v != 0) sequence.push_back(v);

  PermutationSpec spec = permutation_from_sequence(std::move(sequence));
  spec.rows = rows;
  spec.cols = cols;
  return spec;
}

}  // namespace eapcr::model
