// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/trainer.hpp"

#include <json.hpp>

#include "astroseq/errors.hpp"
#include "astroseq/ops.hpp"
#include "astroseq/rng.hpp"

namespace astroseq::trainer {

using model::BoundModel;
using model::RmaatModel;
using model::SegmentBatch;
using model::SegmentOutput;

SegmentLoss classification_loss(const SegmentBatch& batch) {
  const SegmentBatch* b = &batch;
  return [b](const BoundModel& bound, const SegmentOutput& out, std::span<const double> mask, std::size_t t,
             std::size_t n_segments) -> Var {
    Var loss;
    Var logits;
    auto add_term = [&](int label) {
      if (!logits.valid()) logits = model::classify(bound, out, mask);
      const int labels[1] = {label};
      Var term = ad::cross_entropy(logits, labels);
      loss = loss.valid() ? ad::add(loss, term) : term;
    };
    if (t - 1 < b->segment_labels.size() && b->segment_labels[t - 1] >= 0) add_term(b->segment_labels[t - 1]);
    if (t == n_segments && b->final_label >= 0) add_term(b->final_label);
    return loss;
  };
}

std::string MemoryReport::to_json() const {
  nlohmann::json j = {{"forward_peak", forward_peak},
                      {"backward_peak", backward_peak},
                      {"replay_buffer_bytes", replay_buffer_bytes}};
  return j.dump();
}

void ReplayBuffer::push(Matrix state) {
  if (states_.size() >= capacity_) throw CapacityError("replay buffer is full");
  states_.push_back(std::move(state));
}

const Matrix& ReplayBuffer::at(std::size_t t) const {
  if (t == 0 || t > states_.size()) throw InvalidArgument("replay buffer index out of range");
  return states_[t - 1];
}

std::size_t ReplayBuffer::float_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : states_) n += s.size();
  return n;
}

double GradReport::total_loss() const {
  double s = 0.0;
  for (double l : losses) s += l;
  return s;
}

namespace {

void check_inputs(const RmaatModel& model, const SegmentBatch& batch, const RetentionSchedule& schedule) {
  const auto& cfg = model.config();
  if (batch.n_segments() != cfg.n_segments) {
    throw InvalidArgument("batch has " + std::to_string(batch.n_segments()) + " segments, model expects " +
                          std::to_string(cfg.n_segments));
  }
  if (schedule.n_segments != batch.n_segments() || schedule.factors.size() != batch.n_segments()) {
    throw InvalidArgument("retention schedule covers " + std::to_string(schedule.n_segments) +
                          " segments, batch has " + std::to_string(batch.n_segments()));
  }
  if (batch.masks.size() != batch.n_segments()) throw InvalidArgument("batch masks do not match segments");
}

Matrix ones11() { return Matrix(1, 1, 1.0); }

}  // namespace

GradReport amrb_rollout(const RmaatModel& model, const SegmentBatch& batch, const RetentionSchedule& schedule,
                        const RolloutOptions& options) {
  check_inputs(model, batch, schedule);
  const SegmentLoss loss_fn = options.loss ? options.loss : classification_loss(batch);
  const std::size_t T = batch.n_segments();
  const bool has_mem = model.config().n_mem_tokens > 0;
  FloatMeter meter;
  GradReport report;
  report.losses.assign(T, 0.0);

  // Forward without differentiation history, storing m_1 .. m_T.
  ReplayBuffer buffer(T);
  Matrix mem = has_mem ? model.params()[model.memory_init_index()] : Matrix();
  for (std::size_t t = 1; t <= T; ++t) {
    buffer.push(mem);
    meter.add(mem.size());
    Tape tape(false, &meter);
    const BoundModel bound = model.bind(tape, false);
    Var m = has_mem ? tape.leaf(mem, false) : Var();
    const SegmentOutput out = model::segment_forward(bound, batch.tokens[t - 1], batch.masks[t - 1], m, t - 1,
                                                     options.dropout);
    if (t == T) report.final_logits = model::classify(bound, out, batch.masks[t - 1]).value();
    if (has_mem) mem = model::apply_retention(out.mem_next_raw, schedule, t).value();
  }
  report.mem_next = mem;
  report.memory.forward_peak = meter.peak();
  report.memory.replay_buffer_bytes = buffer.float_count() * sizeof(double);

  // Backward: recompute one segment at a time, injecting grad m_{t+1}.
  meter.reset_peak();
  report.grads = model.params().zeros_like();
  Matrix grad_next = has_mem ? Matrix(mem.rows(), mem.cols()) : Matrix();
  for (std::size_t t = T; t >= 1; --t) {
    Tape tape(true, &meter);
    const BoundModel bound = model.bind(tape, true);
    Var m = has_mem ? tape.leaf(buffer.at(t), true) : Var();
    const SegmentOutput out = model::segment_forward(bound, batch.tokens[t - 1], batch.masks[t - 1], m, t - 1,
                                                     options.dropout);
    const Var loss = loss_fn(bound, out, batch.masks[t - 1], t, T);
    if (loss.valid()) {
      report.losses[t - 1] = loss.value()(0, 0);
      tape.backward(loss, ones11(), /*retain=*/true);
    }
    if (has_mem && t < T) {
      const Var scaled = model::apply_retention(out.mem_next_raw, schedule, t);
      tape.backward(scaled, grad_next, /*retain=*/false);
    }
    for (std::size_t i = 0; i < report.grads.size(); ++i) report.grads[i] += bound.leaves[i].grad();
    if (has_mem) grad_next = m.grad();
  }
  if (has_mem) {
    report.grad_mem_1 = grad_next;
    report.grads[model.memory_init_index()] += grad_next;
  }
  report.memory.backward_peak = meter.peak();
  return report;
}

GradReport bptt_rollout(const RmaatModel& model, const SegmentBatch& batch, const RetentionSchedule& schedule,
                        const RolloutOptions& options) {
  check_inputs(model, batch, schedule);
  const SegmentLoss loss_fn = options.loss ? options.loss : classification_loss(batch);
  const std::size_t T = batch.n_segments();
  const bool has_mem = model.config().n_mem_tokens > 0;
  FloatMeter meter;
  GradReport report;
  report.losses.assign(T, 0.0);

  Tape tape(true, &meter);
  const BoundModel bound = model.bind(tape, true);
  Var mem = has_mem ? bound.memory_init : Var();
  Var total;
  for (std::size_t t = 1; t <= T; ++t) {
    const SegmentOutput out = model::segment_forward(bound, batch.tokens[t - 1], batch.masks[t - 1], mem, t - 1,
                                                     options.dropout);
    const Var loss = loss_fn(bound, out, batch.masks[t - 1], t, T);
    if (loss.valid()) {
      report.losses[t - 1] = loss.value()(0, 0);
      total = total.valid() ? ad::add(total, loss) : loss;
    }
    if (t == T) report.final_logits = model::classify(bound, out, batch.masks[t - 1]).value();
    if (has_mem) mem = model::apply_retention(out.mem_next_raw, schedule, t);
  }
  if (has_mem) report.mem_next = mem.value();
  report.memory.forward_peak = meter.peak();

  meter.reset_peak();
  if (total.valid()) tape.backward(total, ones11(), /*retain=*/false);
  report.memory.backward_peak = meter.peak();

  report.grads.reserve(bound.leaves.size());
  for (const Var& leaf : bound.leaves) report.grads.push_back(leaf.grad());
  if (has_mem) report.grad_mem_1 = bound.memory_init.grad();
  return report;
}

Matrix predict(const RmaatModel& model, const SegmentBatch& batch, const RetentionSchedule& schedule) {
  check_inputs(model, batch, schedule);
  const std::size_t T = batch.n_segments();
  const bool has_mem = model.config().n_mem_tokens > 0;
  Matrix mem = has_mem ? model.params()[model.memory_init_index()] : Matrix();
  Matrix logits;
  for (std::size_t t = 1; t <= T; ++t) {
    Tape tape(false);
    const BoundModel bound = model.bind(tape, false);
    Var m = has_mem ? tape.leaf(mem, false) : Var();
    const SegmentOutput out = model::segment_forward(bound, batch.tokens[t - 1], batch.masks[t - 1], m, t - 1);
    if (t == T) logits = model::classify(bound, out, batch.masks[t - 1]).value();
    if (has_mem) mem = model::apply_retention(out.mem_next_raw, schedule, t).value();
  }
  return logits;
}

MemoryReport memory_report(RolloutKind kind, const RmaatModel& model, const RetentionSchedule& schedule,
                           std::uint64_t seed) {
  const auto& cfg = model.config();
  Rng rng = make_rng(seed, Stream::data, 0xbeef);
  std::vector<int> seq(cfg.seg_len * cfg.n_segments);
  for (int& id : seq) id = 1 + static_cast<int>(uniform_index(rng, cfg.vocab_size - 1));
  SegmentBatch batch = model::split_segments(seq, cfg.seg_len, cfg.n_segments);
  batch.final_label = 0;
  const GradReport r =
      kind == RolloutKind::amrb ? amrb_rollout(model, batch, schedule) : bptt_rollout(model, batch, schedule);
  return r.memory;
}

}  // namespace astroseq::trainer
