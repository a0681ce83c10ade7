// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "astroseq/matrix.hpp"
#include "astroseq/ops.hpp"
#include "astroseq/rng.hpp"
#include "astroseq/tape.hpp"

/// Linear-complexity astromorphic attention.
///
/// Write mode aggregates a segment X (N x d) into per-head Hebbian weights
///   H_neuron = phi(K)^T V / m,  H_astro = phi(R)^T V / m,  g = (sum_t phi(k_t))^alpha
/// and read mode retrieves with C = phi(Q) g^T, P = 1 / C,
///   L = phi(Q) (H (.) P) + X,
/// where P scales each output row: row n is P_n * (phi(q_n) H). Nothing of
/// size N x N is formed from X; only the parameter-side positional encoding R
/// touches an n_tokens x n_tokens distance matrix.
namespace astroseq::attention {

struct AttentionConfig {
  std::size_t d = 16;
  std::size_t m = 16;
  std::size_t n_heads = 1;
  /// Largest token count (sequence + memory rows) the positional projections cover.
  std::size_t n_max = 64;
  double alpha = 0.25;
  double pos_scale = 2.0;

  void validate() const;
  std::size_t head_dim() const noexcept { return d / n_heads; }
  std::size_t head_hidden() const noexcept { return m / n_heads; }
};

struct AttentionParams {
  Matrix w_k;     // d x m
  Matrix w_q;     // d x m
  Matrix w_v;     // d x d
  Matrix m_proj;  // n_max x n_max
  Matrix w_rel;   // n_max x m
  /// d x d output projection; empty for a single head.
  Matrix w_o;

  static AttentionParams init(const AttentionConfig& cfg, Rng& rng);
};

/// AttentionParams bound as leaves of one tape.
struct AttentionVars {
  Var w_k, w_q, w_v, m_proj, w_rel, w_o;
};

AttentionVars bind(Tape& tape, const AttentionParams& params, bool requires_grad = true);

struct AttentionToggles {
  /// false: H = H_neuron only.
  bool use_h_astro = true;
  /// false: replace P with the linear-attention normalizer
  /// 1 / (phi(Q) sum_t phi(k_t)^T / m), making the block plain linear attention.
  bool use_p = true;
};

struct HeadWrite {
  Var h_neuron;  // m_h x d_h
  Var h_astro;   // m_h x d_h
  Var key_sum;   // 1 x m_h, sum_t phi(k_t)
  Var g;         // 1 x m_h
};

struct WriteState {
  std::vector<HeadWrite> heads;
};

/// elu(x) + 1, elementwise.
Matrix phi(const Matrix& x);
double phi(double x) noexcept;

/// r_ij = exp(-|i - j| * pos_scale) over token indices 0..n-1.
Matrix base_distance_matrix(std::size_t n_tokens, double pos_scale);

/// Memoizes base_distance_matrix per token count.
class DistanceCache {
 public:
  explicit DistanceCache(double pos_scale) : pos_scale_(pos_scale) {}
  const Matrix& get(std::size_t n_tokens);

 private:
  double pos_scale_;
  std::map<std::size_t, Matrix> cache_;
};

/// R = (M_n r M_n^T) W_rel,n, with M_n, W_rel,n the leading n_tokens rows
/// (and columns) of the learnable projections. Result is n_tokens x m.
Var positional_matrix(std::size_t n_tokens, const AttentionVars& vars, const AttentionConfig& cfg,
                      DistanceCache* cache = nullptr);

/// row_mask (N x 1, entries 0/1) removes padded rows from every write-mode sum.
WriteState write_mode(Var x, Var positional, const AttentionVars& vars, const AttentionConfig& cfg,
                      const Matrix* row_mask = nullptr);

/// Per-head retrieval P (.) (phi(Q_h) H_h), each N x d_h, before the head
/// merge and residual.
std::vector<Var> read_heads(Var x, const WriteState& write, const AttentionVars& vars,
                            const AttentionConfig& cfg, const AttentionToggles& toggles = {});

/// L = merge(read_heads) + X. With one head the merge is the identity,
/// otherwise concat followed by w_o.
Var read_mode(Var x, const WriteState& write, const AttentionVars& vars, const AttentionConfig& cfg,
              const AttentionToggles& toggles = {});

/// write_mode + read_mode. A valid `positional` skips recomputing R.
Var astro_attention(Var x, const AttentionVars& vars, const AttentionConfig& cfg,
                    const AttentionToggles& toggles = {}, const Matrix* row_mask = nullptr,
                    Var positional = {}, DistanceCache* cache = nullptr);

/// Reference O(N^2 d) softmax attention softmax(Q K^T / sqrt(m)) V + X, used
/// only as a timing baseline.
Matrix softmax_attention_reference(const Matrix& x, const AttentionParams& params);

}  // namespace astroseq::attention
