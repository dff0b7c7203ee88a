#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kdrank/autodiff/tape.hpp"

// Differentiable primitives. Every function records one node on the tape that
// owns its inputs; all inputs must share that tape.
namespace kdrank::ops {

// Linear algebra (rank-2 operands).
Var matmul(const Var& a, const Var& b);
/// a · bᵀ. Each output entry is a dot product accumulated in index order.
Var matmul_bt(const Var& a, const Var& b);
Var transpose(const Var& a);

// Element-wise arithmetic.
Var add(const Var& a, const Var& b);
/// Adds a length-n vector to every row of an [m × n] matrix.
Var add_row(const Var& a, const Var& row);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double value);
/// Multiplies every element by a single-element variable.
Var scale_by(const Var& a, const Var& factor);

// Element-wise functions.
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sigmoid(const Var& a);
/// tanh approximation of GELU.
Var gelu(const Var& a);
/// log(1 + exp(x)), evaluated without overflow.
Var softplus(const Var& a);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
/// Removes `axis` by summation.
Var sum_axis(const Var& a, std::size_t axis);
/// Removes `axis` by taking the maximum. Ties route the gradient to the lowest index.
Var max_axis(const Var& a, std::size_t axis);
/// Sum of element-wise products of two same-shape tensors; returns a scalar.
Var dot(const Var& a, const Var& b);

/// Softmax over the last axis. Entries whose `keep` flag is 0 get probability
/// exactly 0 and do not enter the normalizer. An empty mask keeps everything.
Var softmax(const Var& a, std::span<const std::uint8_t> keep = {});

/// Row-wise layer normalization with learned gain and bias of length cols.
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// Cosine similarity between every row of a [m × d] and every row of b [n × d].
/// A zero-norm row has similarity 0 and receives no gradient.
Var cosine_matrix(const Var& a, const Var& b);

// Shape manipulation.
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// Stacks single-element variables into a vector.
Var stack(std::span<const Var> scalars);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
/// Row lookup: out[i] = table[indices[i]].
Var gather_rows(const Var& table, std::span<const std::size_t> indices);
Var reshape(const Var& a, Shape shape);

}  // namespace kdrank::ops
