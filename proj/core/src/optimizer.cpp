// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/optimizer.hpp"

#include <cmath>
#include <string>

#include "astroseq/errors.hpp"

namespace astroseq {

void AdamW::step(std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw InvalidArgument("AdamW: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i], grads[i], "AdamW");
    if (!grads[i].all_finite()) {
      throw TrainingAbort("AdamW: non-finite gradient in parameter " + std::to_string(i) + " at step " +
                          std::to_string(t_ + 1));
    }
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.rows(), p.cols());
      v_.emplace_back(p.rows(), p.cols());
    }
  } else if (m_.size() != params.size()) {
    throw InvalidArgument("AdamW: parameter count changed between steps");
  }
  ++t_;
  const auto& c = config_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[k]);
    }
  }
}

}  // namespace astroseq
