// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "astroseq/matrix.hpp"
#include "astroseq/model.hpp"
#include "astroseq/retention.hpp"
#include "astroseq/tape.hpp"

namespace astroseq::trainer {

/// Loss for 1-based segment t, or an invalid Var when the segment carries
/// no loss. Must be a 1x1 node on the segment's tape.
using SegmentLoss = std::function<Var(const model::BoundModel& bound, const model::SegmentOutput& out,
                                      std::span<const double> mask, std::size_t t, std::size_t n_segments)>;

/// Cross-entropy of classify() against batch.segment_labels[t-1] (when >= 0)
/// and, on the last segment, against batch.final_label.
SegmentLoss classification_loss(const model::SegmentBatch& batch);

struct MemoryReport {
  std::size_t forward_peak = 0;   // floats
  std::size_t backward_peak = 0;  // floats
  std::size_t replay_buffer_bytes = 0;

  std::string to_json() const;
};

/// Values-only snapshots m_1 .. m_T.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
  void push(Matrix state);
  const Matrix& at(std::size_t t) const;  // 1-based
  std::size_t size() const noexcept { return states_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t float_count() const noexcept;

 private:
  std::size_t capacity_;
  std::vector<Matrix> states_;
};

struct GradReport {
  /// One gradient per model parameter, in ParameterSet order. The memory_init
  /// gradient already includes grad_mem_1.
  std::vector<Matrix> grads;
  Matrix grad_mem_1;
  std::vector<double> losses;  // L_t, 0 where a segment has no loss
  Matrix mem_next;             // detached m_{T+1}
  Matrix final_logits;         // classify() on the last segment
  MemoryReport memory;

  double total_loss() const;
};

struct RolloutOptions {
  SegmentLoss loss;  // defaults to classification_loss(batch)
  const model::DropoutContext* dropout = nullptr;
};

GradReport amrb_rollout(const model::RmaatModel& model, const model::SegmentBatch& batch,
                        const RetentionSchedule& schedule, const RolloutOptions& options = {});

/// Reference: one unbroken tape across all segments.
GradReport bptt_rollout(const model::RmaatModel& model, const model::SegmentBatch& batch,
                        const RetentionSchedule& schedule, const RolloutOptions& options = {});

/// Gradient-free forward returning the last segment's logits.
Matrix predict(const model::RmaatModel& model, const model::SegmentBatch& batch, const RetentionSchedule& schedule);

enum class RolloutKind { amrb, bptt };

/// Counted stored floats of one rollout on a synthetic batch.
MemoryReport memory_report(RolloutKind kind, const model::RmaatModel& model, const RetentionSchedule& schedule,
                           std::uint64_t seed = 0);

}  // namespace astroseq::trainer
