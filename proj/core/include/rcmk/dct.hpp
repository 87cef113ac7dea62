#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rcmk/tensor.hpp"

namespace rcmk {

// Orthonormal DCT-II basis: row r holds frequency r (row 0 = DC) and
// B * B^T = I.
Tensor dct_matrix(std::int64_t n, DType dtype = DType::Float64);

// JPEG-style zigzag walk over the (row_freq, col_freq) grid of a k x k block.
std::vector<std::pair<std::int64_t, std::int64_t>> zigzag_order(std::int64_t k);

// First `count` 2-D DCT-II basis functions (outer products of 1-D basis rows)
// in zigzag frequency order. Each filter is k x k with unit Frobenius norm and
// the set is orthogonal. count must not exceed k*k.
std::vector<Tensor> dct2_filters(std::int64_t k, std::int64_t count,
                                 DType dtype = DType::Float64);

}  // namespace rcmk
