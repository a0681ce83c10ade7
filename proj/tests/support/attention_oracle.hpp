// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-token loop formulation of astromorphic attention. Written from the
// scalar equations with explicit loops and no library matrix kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "astroseq/attention.hpp"
#include "astroseq/matrix.hpp"

namespace astroseq::testing {

inline double elu1(double x) { return x >= 0.0 ? x + 1.0 : std::exp(x); }

/// row_mask may be empty (no padding).
inline Matrix attention_loop(const Matrix& x, const attention::AttentionParams& p,
                             const attention::AttentionConfig& cfg, const std::vector<double>& row_mask = {},
                             bool use_h_astro = true, bool use_p = true) {
  const std::size_t n = x.rows(), d = cfg.d, m = cfg.m, heads = cfg.n_heads;
  const std::size_t mh = m / heads, dh = d / heads;
  auto keep = [&](std::size_t t) { return row_mask.empty() ? 1.0 : row_mask[t]; };

  // R = (M r M^T) W_rel with r(a, b) = exp(-|a - b| * pos_scale), staged right to left.
  std::vector<std::vector<double>> mt_w(n, std::vector<double>(m, 0.0)), r_mt_w = mt_w, rel = mt_w;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < n; ++c) mt_w[b][j] += p.m_proj(c, b) * p.w_rel(c, j);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t b = 0; b < n; ++b) {
        const double dist = a > b ? double(a - b) : double(b - a);
        r_mt_w[a][j] += std::exp(-dist * cfg.pos_scale) * mt_w[b][j];
      }
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t a = 0; a < n; ++a) rel[t][j] += p.m_proj(t, a) * r_mt_w[a][j];

  auto proj = [&](const Matrix& w, std::size_t t, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += x(t, k) * w(k, j);
    return s;
  };

  Matrix merged(n, d);
  for (std::size_t h = 0; h < heads; ++h) {
    // Write mode: accumulate token by token.
    std::vector<std::vector<double>> hn(mh, std::vector<double>(dh, 0.0)), ha = hn;
    std::vector<double> key_sum(mh, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double w = keep(t);
      for (std::size_t i = 0; i < mh; ++i) {
        const double fk = w * elu1(proj(p.w_k, t, h * mh + i));
        const double fr = elu1(rel[t][h * mh + i]);
        key_sum[i] += fk;
        for (std::size_t j = 0; j < dh; ++j) {
          const double v = w * proj(p.w_v, t, h * dh + j);
          hn[i][j] += fk * v / double(mh);
          ha[i][j] += fr * v / double(mh);
        }
      }
    }
    // Read mode: one query at a time.
    for (std::size_t t = 0; t < n; ++t) {
      std::vector<double> fq(mh);
      for (std::size_t i = 0; i < mh; ++i) fq[i] = elu1(proj(p.w_q, t, h * mh + i));
      double c = 0.0;
      for (std::size_t i = 0; i < mh; ++i) {
        c += use_p ? fq[i] * std::pow(key_sum[i], cfg.alpha) : fq[i] * key_sum[i] / double(mh);
      }
      const double pn = 1.0 / std::max(c, 1e-6);
      for (std::size_t j = 0; j < dh; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < mh; ++i) s += fq[i] * (hn[i][j] + (use_h_astro ? ha[i][j] : 0.0));
        merged(t, h * dh + j) = pn * s;
      }
    }
  }
  Matrix out(n, d);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      if (heads == 1) {
        v = merged(t, j);
      } else {
        for (std::size_t k = 0; k < d; ++k) v += merged(t, k) * p.w_o(k, j);
      }
      out(t, j) = v + x(t, j);
    }
  return out;
}

}  // namespace astroseq::testing
