// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "astroseq/errors.hpp"
#include "astroseq/ops.hpp"
#include "astroseq/optimizer.hpp"
#include "astroseq/rng.hpp"
#include "astroseq/trainer.hpp"

using namespace astroseq;
using namespace astroseq::trainer;

namespace {

model::ModelConfig tiny(std::size_t T, std::size_t mem = 2) {
  model::ModelConfig c;
  c.d = 8;
  c.m = 6;
  c.ffn_dim = 16;
  c.n_mem_tokens = mem;
  c.seg_len = 8;
  c.n_segments = T;
  c.vocab_size = 12;
  c.n_classes = 3;
  return c;
}

model::SegmentBatch random_batch(const model::ModelConfig& c, std::uint64_t seed, bool per_segment) {
  Rng rng = make_rng(seed, Stream::validation);
  std::vector<int> seq(c.seg_len * c.n_segments - 3);
  for (int& v : seq) v = 1 + static_cast<int>(uniform_index(rng, c.vocab_size - 1));
  auto b = model::split_segments(seq, c.seg_len, c.n_segments);
  b.final_label = static_cast<int>(seed % c.n_classes);
  if (per_segment) {
    for (std::size_t t = 0; t < c.n_segments; ++t) b.segment_labels[t] = static_cast<int>((seed + t) % c.n_classes);
  }
  return b;
}

double worst_error(const GradReport& a, const GradReport& b) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.grads.size(); ++i) w = std::max(w, max_scaled_error(a.grads[i], b.grads[i]));
  return w;
}

}  // namespace

TEST_CASE("AMRB matches BPTT with final, per-segment, derived and uniform settings") {
  for (std::size_t T : {2, 4}) {
    for (bool per_segment : {false, true}) {
      for (bool derived : {false, true}) {
        const auto c = tiny(T);
        const model::RmaatModel model(c, T * 10 + per_segment);
        const auto batch = random_batch(c, T + per_segment, per_segment);
        const auto schedule = derived ? retention_schedule(static_cast<long long>(T), neuroglia::MacroSpec{})
                                      : uniform_schedule(static_cast<long long>(T));
        const auto a = amrb_rollout(model, batch, schedule);
        const auto b = bptt_rollout(model, batch, schedule);
        CHECK(worst_error(a, b) <= 1e-10);
        CHECK(max_scaled_error(a.grad_mem_1, b.grad_mem_1) <= 1e-10);
        CHECK(std::abs(a.total_loss() - b.total_loss()) <= 1e-12 * std::abs(b.total_loss()));
        CHECK(a.final_logits == b.final_logits);
      }
    }
  }
}

TEST_CASE("single segment AMRB is plain backprop") {
  const auto c = tiny(1);
  const model::RmaatModel model(c, 3);
  const auto batch = random_batch(c, 3, false);
  const auto s = uniform_schedule(1);
  CHECK(worst_error(amrb_rollout(model, batch, s), bptt_rollout(model, batch, s)) <= 1e-12);
}

TEST_CASE("custom per-segment losses agree too") {
  const auto c = tiny(3);
  const model::RmaatModel model(c, 4);
  const auto batch = random_batch(c, 4, false);
  RolloutOptions opt;
  opt.loss = [](const model::BoundModel&, const model::SegmentOutput& out, std::span<const double>, std::size_t t,
                std::size_t) {
    Tape& tape = out.o_t.tape();
    return ad::mse(out.o_t, tape.constant(Matrix(out.o_t.rows(), out.o_t.cols(), 0.1 * static_cast<double>(t))));
  };
  const auto s = retention_schedule(3, neuroglia::MacroSpec{});
  CHECK(worst_error(amrb_rollout(model, batch, s, opt), bptt_rollout(model, batch, s, opt)) <= 1e-10);
}

TEST_CASE("injected gradient scales with the retention factor") {
  // The gradient injected through segment one is linear in its factor.
  const auto c = tiny(2);
  const model::RmaatModel model(c, 5);
  const auto batch = random_batch(c, 5, false);
  RetentionSchedule full;
  full.n_segments = 2;
  full.factors = {1.0, 1.0};
  auto grad_m1 = [&](double factor) {
    Tape tape;
    const auto bound = model.bind(tape, true);
    const Var m1 = tape.leaf(model.params()[model.memory_init_index()], true);
    const auto out = model::segment_forward(bound, batch.tokens[0], batch.masks[0], m1, 0);
    RetentionSchedule s = full;
    s.factors[0] = factor;
    const Var scaled = model::apply_retention(out.mem_next_raw, s, 1);
    tape.backward(scaled, Matrix(c.n_mem_tokens, c.d, 1.0));
    return m1.grad();
  };
  const Matrix g1 = grad_m1(1.0), gh = grad_m1(0.5);
  CHECK(max_scaled_error(gh, g1 * 0.5) <= 1e-15);
}

TEST_CASE("schedule and segment count must agree") {
  const auto c = tiny(2);
  const model::RmaatModel model(c, 6);
  const auto batch = random_batch(c, 6, false);
  CHECK_THROWS_AS(amrb_rollout(model, batch, uniform_schedule(3)), InvalidArgument);
  CHECK_THROWS_AS(bptt_rollout(model, batch, uniform_schedule(1)), InvalidArgument);
}

TEST_CASE("replay buffer holds T history-free states") {
  ReplayBuffer buf(2);
  buf.push(Matrix(2, 3, 1.0));
  buf.push(Matrix(2, 3, 2.0));
  CHECK(buf.size() == 2);
  CHECK(buf.float_count() == 12);
  CHECK(buf.at(2) == Matrix(2, 3, 2.0));
  CHECK_THROWS_AS(buf.push(Matrix(1, 1)), CapacityError);
  CHECK_THROWS_AS(buf.at(0), InvalidArgument);
}

TEST_CASE("memory report arithmetic and scaling") {
  std::vector<std::size_t> amrb_peaks;
  for (std::size_t T : {2, 4, 8, 16}) {
    const auto c = tiny(T);
    const model::RmaatModel model(c, 7);
    const auto s = uniform_schedule(static_cast<long long>(T));
    const auto a = memory_report(RolloutKind::amrb, model, s);
    const auto b = memory_report(RolloutKind::bptt, model, s);
    CHECK(a.replay_buffer_bytes == T * c.n_mem_tokens * c.d * sizeof(double));
    CHECK(a.backward_peak < b.backward_peak);
    amrb_peaks.push_back(a.backward_peak - T * c.n_mem_tokens * c.d);
  }
  // Without the buffer term the AMRB backward peak does not depend on T.
  for (std::size_t p : amrb_peaks) CHECK(p == amrb_peaks.front());
}

TEST_CASE("single segment peaks agree within one segment's tape") {
  const auto c = tiny(1);
  const model::RmaatModel model(c, 8);
  const auto s = uniform_schedule(1);
  const auto a = memory_report(RolloutKind::amrb, model, s);
  const auto b = memory_report(RolloutKind::bptt, model, s);
  const double diff = std::abs(static_cast<double>(a.backward_peak) - static_cast<double>(b.backward_peak));
  CHECK(diff <= static_cast<double>(b.forward_peak));
}

TEST_CASE("AdamW basics") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  cfg.lr = 0.1;
  {
    AdamW opt(cfg);
    std::vector<Matrix> p{Matrix{{1.0, -2.0}}};
    const std::vector<Matrix> g{Matrix(1, 2, 0.0)};
    opt.step(p, g);
    CHECK(p[0] == Matrix{{1.0, -2.0}});
  }
  {
    // One step on x^2 / 2 from x = 1.
    AdamW opt(cfg);
    std::vector<Matrix> p{Matrix{{1.0}}};
    const std::vector<Matrix> g{Matrix{{1.0}}};
    opt.step(p, g);
    CHECK(std::abs(p[0](0, 0)) < 1.0);
  }
  {
    AdamW opt(cfg);
    std::vector<Matrix> p{Matrix{{1.0}}};
    const std::vector<Matrix> g{Matrix{{NAN}}};
    CHECK_THROWS_AS(opt.step(p, g), TrainingAbort);
    CHECK(p[0](0, 0) == 1.0);
  }
}

TEST_CASE("AdamW trajectories are deterministic") {
  auto run = [] {
    AdamW opt;
    std::vector<Matrix> p{Matrix{{0.3, -0.7}, {1.1, 0.2}}};
    for (int k = 0; k < 20; ++k) {
      std::vector<Matrix> g{p[0] * 2.0};
      opt.step(p, g);
    }
    return p[0];
  };
  CHECK(run() == run());
}
