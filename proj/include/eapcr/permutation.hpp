#pragma once

#include <cstddef>
#include <vector>

namespace eapcr::model {

// Reorders N features so that neighbours in the original order end up apart
// and distant ones end up adjacent.
//
// The elements 1..N are written row-major into an R x L grid (L = ceil(sqrt N),
// R = ceil(N / L)); the grid is transposed and read back row-major, dropping
// the R*L - N empty trailing cells. For N = 9 this gives 1,4,7,2,5,8,3,6,9.
struct PermutationSpec {
  std::size_t n = 0;
  std::size_t rows = 0;  // R
  std::size_t cols = 0;  // L
  std::vector<std::size_t> sequence;       // 1-based, length n
  std::vector<std::vector<int>> matrix;    // M[i][sequence[i]-1] = 1

  // True when the sequence is the identity (e.g. N = 2); the permuted branch
  // then sees the same matrix as the plain one.
  bool degenerate() const;
  // sequence of the inverse permutation, 1-based
  std::vector<std::size_t> inverse_sequence() const;
};

PermutationSpec build_permutation(std::size_t n);

// A permutation given directly as a 1-based sequence (used for inverses).
PermutationSpec permutation_from_sequence(std::vector<std::size_t> sequence);

}  // namespace eapcr::model
