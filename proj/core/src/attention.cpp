// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/attention.hpp"

#include <cmath>
#include <string>

#include "astroseq/errors.hpp"

namespace astroseq::attention {

void AttentionConfig::validate() const {
  if (d == 0 || m == 0 || n_heads == 0 || n_max == 0) {
    throw InvalidArgument("attention dimensions must be positive");
  }
  if (d % n_heads != 0 || m % n_heads != 0) {
    throw InvalidArgument("d (" + std::to_string(d) + ") and m (" + std::to_string(m) +
                          ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  if (!(pos_scale > 0.0)) throw InvalidArgument("pos_scale must be > 0");
}

AttentionParams AttentionParams::init(const AttentionConfig& cfg, Rng& rng) {
  cfg.validate();
  const double a = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  const double b = 1.0 / std::sqrt(static_cast<double>(cfg.n_max));
  AttentionParams p;
  p.w_k = uniform_matrix(rng, cfg.d, cfg.m, -a, a);
  p.w_q = uniform_matrix(rng, cfg.d, cfg.m, -a, a);
  p.w_v = uniform_matrix(rng, cfg.d, cfg.d, -a, a);
  p.m_proj = uniform_matrix(rng, cfg.n_max, cfg.n_max, -b, b);
  p.w_rel = uniform_matrix(rng, cfg.n_max, cfg.m, -b, b);
  if (cfg.n_heads > 1) p.w_o = uniform_matrix(rng, cfg.d, cfg.d, -a, a);
  return p;
}

AttentionVars bind(Tape& tape, const AttentionParams& params, bool requires_grad) {
  AttentionVars v;
  v.w_k = tape.leaf(params.w_k, requires_grad, LeafKind::parameter);
  v.w_q = tape.leaf(params.w_q, requires_grad, LeafKind::parameter);
  v.w_v = tape.leaf(params.w_v, requires_grad, LeafKind::parameter);
  v.m_proj = tape.leaf(params.m_proj, requires_grad, LeafKind::parameter);
  v.w_rel = tape.leaf(params.w_rel, requires_grad, LeafKind::parameter);
  if (!params.w_o.empty()) v.w_o = tape.leaf(params.w_o, requires_grad, LeafKind::parameter);
  return v;
}

double phi(double x) noexcept { return x >= 0.0 ? x + 1.0 : std::exp(x); }

Matrix phi(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = phi(x.data()[i]);
  return out;
}

Matrix base_distance_matrix(std::size_t n_tokens, double pos_scale) {
  Matrix r(n_tokens, n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i)
    for (std::size_t j = 0; j < n_tokens; ++j) {
      const double dist = i > j ? static_cast<double>(i - j) : static_cast<double>(j - i);
      r(i, j) = std::exp(-dist * pos_scale);
    }
  return r;
}

const Matrix& DistanceCache::get(std::size_t n_tokens) {
  auto it = cache_.find(n_tokens);
  if (it == cache_.end()) it = cache_.emplace(n_tokens, base_distance_matrix(n_tokens, pos_scale_)).first;
  return it->second;
}

Var positional_matrix(std::size_t n_tokens, const AttentionVars& vars, const AttentionConfig& cfg,
                      DistanceCache* cache) {
  if (n_tokens == 0) throw InvalidArgument("positional_matrix: n_tokens must be >= 1");
  if (n_tokens > cfg.n_max) {
    throw CapacityError("positional_matrix: " + std::to_string(n_tokens) +
                        " tokens exceed the positional capacity " + std::to_string(cfg.n_max));
  }
  Tape& tape = vars.m_proj.tape();
  Var r = tape.constant(cache ? cache->get(n_tokens) : base_distance_matrix(n_tokens, cfg.pos_scale));
  Var m_rows = ad::slice_rows(vars.m_proj, 0, n_tokens);
  Var m_n = ad::slice_cols(m_rows, 0, n_tokens);
  Var w_rel_n = ad::slice_rows(vars.w_rel, 0, n_tokens);
  // (M r M^T) W_rel evaluated right to left: every product is n x m
  Var right = ad::matmul(ad::transpose(m_n), w_rel_n);
  return ad::matmul(m_n, ad::matmul(r, right));
}

WriteState write_mode(Var x, Var positional, const AttentionVars& vars, const AttentionConfig& cfg,
                      const Matrix* row_mask) {
  const std::size_t n = x.rows();
  if (x.cols() != cfg.d) {
    throw ShapeError("write_mode: input is " + x.value().shape_string() + ", expected width " +
                     std::to_string(cfg.d));
  }
  if (positional.rows() != n || positional.cols() != cfg.m) {
    throw ShapeError("write_mode: positional encoding is " + positional.value().shape_string() +
                     ", expected " + std::to_string(n) + "x" + std::to_string(cfg.m));
  }
  Tape& tape = x.tape();
  Var phi_k = ad::elu_plus_one(ad::matmul(x, vars.w_k));
  Var v = ad::matmul(x, vars.w_v);
  Var phi_r = ad::elu_plus_one(positional);
  if (row_mask) {
    if (row_mask->rows() != n || row_mask->cols() != 1) throw ShapeError("write_mode: mask must be N x 1");
    Var mask = tape.constant(*row_mask);
    phi_k = ad::hadamard(phi_k, ad::broadcast_col(mask, cfg.m));
    v = ad::hadamard(v, ad::broadcast_col(mask, cfg.d));
  }

  const std::size_t mh = cfg.head_hidden();
  const std::size_t dh = cfg.head_dim();
  const double inv_m = 1.0 / static_cast<double>(mh);
  WriteState state;
  state.heads.reserve(cfg.n_heads);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    Var phi_k_h = cfg.n_heads == 1 ? phi_k : ad::slice_cols(phi_k, h * mh, mh);
    Var phi_r_h = cfg.n_heads == 1 ? phi_r : ad::slice_cols(phi_r, h * mh, mh);
    Var v_h = cfg.n_heads == 1 ? v : ad::slice_cols(v, h * dh, dh);
    HeadWrite hw;
    hw.h_neuron = ad::scalar_mul(ad::matmul(ad::transpose(phi_k_h), v_h), inv_m);
    hw.h_astro = ad::scalar_mul(ad::matmul(ad::transpose(phi_r_h), v_h), inv_m);
    hw.key_sum = ad::col_sum(phi_k_h);
    hw.g = ad::power(hw.key_sum, cfg.alpha);
    state.heads.push_back(hw);
  }
  return state;
}

std::vector<Var> read_heads(Var x, const WriteState& write, const AttentionVars& vars,
                            const AttentionConfig& cfg, const AttentionToggles& toggles) {
  if (write.heads.size() != cfg.n_heads) throw ShapeError("read_mode: head count mismatch");
  const std::size_t mh = cfg.head_hidden();
  const std::size_t dh = cfg.head_dim();
  Var phi_q = ad::elu_plus_one(ad::matmul(x, vars.w_q));
  std::vector<Var> outs;
  outs.reserve(cfg.n_heads);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const HeadWrite& hw = write.heads[h];
    Var phi_q_h = cfg.n_heads == 1 ? phi_q : ad::slice_cols(phi_q, h * mh, mh);
    Var c;
    if (toggles.use_p) {
      c = ad::matmul(phi_q_h, ad::transpose(hw.g));
    } else {
      c = ad::scalar_mul(ad::matmul(phi_q_h, ad::transpose(hw.key_sum)), 1.0 / static_cast<double>(mh));
    }
    Var p = ad::reciprocal(c);
    Var hebb = toggles.use_h_astro ? ad::add(hw.h_neuron, hw.h_astro) : hw.h_neuron;
    Var retrieved = ad::matmul(phi_q_h, hebb);
    outs.push_back(ad::hadamard(ad::broadcast_col(p, dh), retrieved));
  }
  return outs;
}

Var read_mode(Var x, const WriteState& write, const AttentionVars& vars, const AttentionConfig& cfg,
              const AttentionToggles& toggles) {
  std::vector<Var> heads = read_heads(x, write, vars, cfg, toggles);
  Var merged = heads.size() == 1 ? heads[0] : ad::matmul(ad::concat_cols(heads), vars.w_o);
  return ad::add(merged, x);
}

Var astro_attention(Var x, const AttentionVars& vars, const AttentionConfig& cfg,
                    const AttentionToggles& toggles, const Matrix* row_mask, Var positional,
                    DistanceCache* cache) {
  if (!positional.valid()) positional = positional_matrix(x.rows(), vars, cfg, cache);
  WriteState write = write_mode(x, positional, vars, cfg, row_mask);
  return read_mode(x, write, vars, cfg, toggles);
}

Matrix softmax_attention_reference(const Matrix& x, const AttentionParams& params) {
  const Matrix q = matmul(x, params.w_q);
  const Matrix k = matmul(x, params.w_k);
  const Matrix v = matmul(x, params.w_v);
  const std::size_t n = x.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix scores(n, n);
  matmul_a_bt_accumulate(q, k, scores);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = scores.row(i);
    double mx = -INFINITY;
    for (double& s : row) mx = std::max(mx, s *= scale);
    double z = 0.0;
    for (double& s : row) z += (s = std::exp(s - mx));
    for (double& s : row) s /= z;
  }
  Matrix out = matmul(scores, v);
  out += x;
  return out;
}

}  // namespace astroseq::attention
