// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "astroseq/matrix.hpp"

namespace astroseq {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay and bias-corrected moments.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  /// Throws TrainingAbort (params untouched) if any gradient is non-finite.
  void step(std::span<Matrix> params, std::span<const Matrix> grads);

  const AdamWConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamWConfig config_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace astroseq
