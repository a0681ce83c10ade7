// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "astroseq/tape.hpp"

/// Differentiable primitives over Var. Every op validates shapes, computes its
/// value eagerly and registers an exact analytic backward rule.
namespace astroseq::ad {

/// Lower clamp applied inside reciprocal(): 1 / max(x, kReciprocalFloor).
inline constexpr double kReciprocalFloor = 1e-6;

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var hadamard(Var a, Var b);
Var scalar_mul(Var a, double scalar);
Var transpose(Var a);

/// N x d -> N x 1
Var row_sum(Var a);
/// N x d -> 1 x d
Var col_sum(Var a);

/// elu(x) + 1: x + 1 for x >= 0, exp(x) otherwise. Strictly positive.
Var elu_plus_one(Var a);
/// Elementwise x^exponent; every entry must be strictly positive.
Var power(Var a, double exponent);
/// Elementwise 1 / max(x, floor). Entries <= 0 raise DomainError; entries in
/// (0, floor) are clamped and receive zero gradient.
Var reciprocal(Var a, double floor = kReciprocalFloor);

/// N x 1 -> N x cols, each row filled with its single entry.
Var broadcast_col(Var a, std::size_t cols);
/// 1 x d -> rows x d
Var broadcast_row(Var a, std::size_t rows);

/// Per-row standardization (no affine part).
Var layer_norm(Var a, double eps = 1e-5);
Var softmax_rows(Var a);
/// Mean over rows of -log softmax(logits)[label]. Result is 1 x 1.
Var cross_entropy(Var logits, std::span<const int> labels);
/// Mean squared error, 1 x 1.
Var mse(Var a, Var b);

/// tanh-approximated GELU.
Var gelu(Var a);

Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_rows(Var top, Var bottom);
Var concat_cols(std::span<const Var> parts);
/// Row lookup: out.row(i) = table.row(ids[i]).
Var gather_rows(Var table, std::span<const int> ids);

}  // namespace astroseq::ad
