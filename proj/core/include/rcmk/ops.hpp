#pragma once

#include <span>

#include "rcmk/autograd.hpp"
#include "rcmk/tensor.hpp"

namespace rcmk {

// Elementwise binary ops broadcast numpy-style: shapes are right-aligned and
// size-1 dimensions expand. Dtypes must match exactly.
Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// Kink conventions: relu'(0)=0, abs'(0)=0, sign'(x)=0 everywhere, and
// clamp' is 0 at and beyond the bounds.
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sign(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]

Tensor sum(const Tensor& a);   // scalar
Tensor mean(const Tensor& a);  // scalar

Tensor reshape(const Tensor& a, Shape shape);

// Channel-dimension surgery on NCHW tensors.
Tensor concat_channels(std::span<const Tensor> parts);
Tensor slice_channels(const Tensor& a, std::int64_t begin, std::int64_t end);

// Repeats the whole tensor `times` along dim 0: [d0,...] -> [times*d0,...].
// Backward sums the gradient over the repeats; this implements weight tying
// of one filter set across many channels.
Tensor tile_first_dim(const Tensor& a, std::int64_t times);

Tensor global_avg_pool(const Tensor& x);  // [N,C,H,W] -> [N,C]

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Materialized-expansion reference for the broadcast property tests: expands
// `a` to `target` by explicit copying, no broadcasting logic shared with the
// fast path.
Tensor expand_to(const Tensor& a, const Shape& target);
// Reduces `g` back to `shape` by summing broadcast dimensions (backward of
// the expansion).
Tensor sum_to(const Tensor& g, const Shape& shape);

}  // namespace rcmk
