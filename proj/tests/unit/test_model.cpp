// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "astroseq/checkpoint.hpp"
#include "astroseq/errors.hpp"
#include "astroseq/model.hpp"
#include "astroseq/ops.hpp"
#include "astroseq/rng.hpp"
#include "astroseq/trainer.hpp"

using namespace astroseq;
using namespace astroseq::model;

namespace {

ModelConfig tiny(std::size_t mem = 2, std::size_t T = 2) {
  ModelConfig c;
  c.d = 8;
  c.m = 6;
  c.ffn_dim = 16;
  c.n_mem_tokens = mem;
  c.seg_len = 6;
  c.n_segments = T;
  c.vocab_size = 20;
  c.n_classes = 3;
  return c;
}

std::vector<int> random_tokens(std::size_t n, std::uint64_t seed, int lo = 1, int hi = 20) {
  Rng rng = make_rng(seed, Stream::validation);
  std::vector<int> t(n);
  for (int& v : t) v = lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo)));
  return t;
}

}  // namespace

TEST_CASE("split_segments pads the final segment") {
  const std::vector<int> eight{1, 2, 3, 4, 5, 6, 7, 8};
  auto b = split_segments(eight, 4, 2);
  CHECK(b.n_segments() == 2);
  CHECK(b.masks[1] == std::vector<double>{1, 1, 1, 1});
  const std::vector<int> five{1, 2, 3, 4, 5};
  b = split_segments(five, 4, 2);
  CHECK(b.tokens[1] == std::vector<int>{5, kPadToken, kPadToken, kPadToken});
  CHECK(b.masks[1] == std::vector<double>{1, 0, 0, 0});
  CHECK_THROWS_AS(split_segments(std::vector<int>(9, 1), 4, 2), InvalidArgument);
  CHECK(split_segments(std::vector<int>(8192, 1), 512, 16).n_segments() == 16);
}

TEST_CASE("segment output shapes and the memoryless case") {
  for (std::size_t mem : {std::size_t{0}, std::size_t{3}}) {
    const RmaatModel model(tiny(mem), 1);
    Tape tape(false);
    const auto bound = model.bind(tape, false);
    const auto tokens = random_tokens(6, 2);
    const std::vector<double> mask(6, 1.0);
    const Var m = mem > 0 ? bound.memory_init : Var();
    const auto out = segment_forward(bound, tokens, mask, m, 0);
    CHECK(out.o_t.rows() == 6);
    CHECK(out.o_t.cols() == 8);
    CHECK(out.block_out.rows() == 6 + mem);
    CHECK(out.mem_next_raw.valid() == (mem > 0));
    if (mem > 0) CHECK(out.mem_next_raw.rows() == mem);
  }
}

TEST_CASE("segment forward is bitwise deterministic") {
  const RmaatModel model(tiny(), 3);
  const auto tokens = random_tokens(6, 3);
  const std::vector<double> mask(6, 1.0);
  auto run = [&] {
    Tape tape(false);
    const auto bound = model.bind(tape, false);
    const auto out = segment_forward(bound, tokens, mask, bound.memory_init, 0);
    return out.block_out.value();
  };
  CHECK(run() == run());
}

TEST_CASE("segment forward checks shapes") {
  const RmaatModel model(tiny(), 3);
  Tape tape(false);
  const auto bound = model.bind(tape, false);
  const std::vector<double> mask(5, 1.0);
  CHECK_THROWS_AS(segment_forward(bound, random_tokens(5, 1), mask, bound.memory_init, 0), ShapeError);
  const std::vector<double> mask6(6, 1.0);
  CHECK_THROWS_AS(segment_forward(bound, random_tokens(6, 1), mask6, tape.constant(Matrix(3, 8)), 0), ShapeError);
}

TEST_CASE("retention scaling values and gradient") {
  RetentionSchedule s;
  s.n_segments = 2;
  s.factors = {1.0, 0.5};
  Tape tape;
  const Var raw = tape.leaf(Matrix(2, 3, 1.0), true);
  CHECK(apply_retention(raw, s, 1).value() == Matrix(2, 3, 1.0));
  const Var half = apply_retention(raw, s, 2);
  CHECK(half.value() == Matrix(2, 3, 0.5));
  Rng rng = make_rng(4, Stream::validation);
  const Matrix upstream = normal_matrix(rng, 2, 3, 1.0);
  tape.backward(half, upstream);
  CHECK(raw.grad() == upstream * 0.5);
  Tape t2;
  CHECK_THROWS_AS(apply_retention(t2.leaf(Matrix(1, 1), false), s, 3), InvalidArgument);
}

TEST_CASE("single-class head always predicts class zero") {
  ModelConfig c = tiny();
  c.n_classes = 1;
  const RmaatModel model(c, 5);
  Tape tape(false);
  const auto bound = model.bind(tape, false);
  const std::vector<double> mask(6, 1.0);
  const auto out = segment_forward(bound, random_tokens(6, 5), mask, bound.memory_init, 0);
  CHECK(classify(bound, out, mask).cols() == 1);
}

TEST_CASE("pad rows do not influence the logits") {
  const RmaatModel model(tiny(), 6);
  const std::vector<double> mask{1, 1, 1, 1, 0, 0};
  auto logits = [&](std::vector<int> tokens) {
    Tape tape(false);
    const auto bound = model.bind(tape, false);
    const auto out = segment_forward(bound, tokens, mask, bound.memory_init, 0);
    return classify(bound, out, mask).value();
  };
  const Matrix base = logits({4, 5, 6, 7, 9, 12});
  CHECK(logits({4, 5, 6, 7, 12, 9}) == base);
  CHECK(logits({4, 5, 6, 7, kPadToken, kPadToken}) == base);
}

TEST_CASE("memory carries segment-one context to the final output") {
  for (std::size_t mem : {std::size_t{0}, std::size_t{2}}) {
    const RmaatModel model(tiny(mem), 7);
    Tape tape;
    const auto bound = model.bind(tape, true);
    // Tokens 1..6 only in segment one, 10..15 only in segment two.
    const std::vector<int> s1{1, 2, 3, 4, 5, 6}, s2{10, 11, 12, 13, 14, 15};
    const std::vector<double> mask(6, 1.0);
    const auto schedule = uniform_schedule(2);
    const Var m1 = mem > 0 ? bound.memory_init : Var();
    const auto out1 = segment_forward(bound, s1, mask, m1, 0);
    const Var m2 = mem > 0 ? apply_retention(out1.mem_next_raw, schedule, 1) : Var();
    const auto out2 = segment_forward(bound, s2, mask, m2, 1);
    // A constant upstream is annihilated by the unit-gain layer norm.
    Rng rng = make_rng(7, Stream::validation);
    tape.backward(out2.o_t, normal_matrix(rng, 6, 8, 1.0));
    double g = 0.0;
    for (int tok = 1; tok <= 6; ++tok)
      for (double v : bound.embedding.grad().row(static_cast<std::size_t>(tok))) g = std::max(g, std::abs(v));
    if (mem == 0) CHECK(g == 0.0);
    else CHECK(g > 1e-8);
  }
}

TEST_CASE("memory stays bounded over sixteen segments") {
  ModelConfig c = tiny(2, 16);
  const RmaatModel model(c, 8);
  const auto schedule = retention_schedule(16, neuroglia::MacroSpec{});
  auto batch = split_segments(random_tokens(6 * 16, 8), 6, 16);
  batch.final_label = 0;
  const auto rep = trainer::amrb_rollout(model, batch, schedule);
  CHECK(rep.mem_next.all_finite());
  CHECK(max_abs(rep.mem_next) < 1e3);
}

TEST_CASE("rollout forward equals an explicit recurrence loop") {
  const RmaatModel model(tiny(2, 3), 9);
  const auto schedule = retention_schedule(3, neuroglia::MacroSpec{});
  auto batch = split_segments(random_tokens(16, 9), 6, 3);
  batch.final_label = 1;
  Matrix mem = model.params()[model.memory_init_index()];
  for (std::size_t t = 1; t <= 3; ++t) {
    Tape tape(false);
    const auto bound = model.bind(tape, false);
    const auto out = segment_forward(bound, batch.tokens[t - 1], batch.masks[t - 1], tape.constant(mem), t - 1);
    mem = out.mem_next_raw.value() * schedule.factor(t);
  }
  CHECK(trainer::amrb_rollout(model, batch, schedule).mem_next == mem);
  CHECK(trainer::bptt_rollout(model, batch, schedule).mem_next == mem);
}

TEST_CASE("dropout masks are keyed by example and segment") {
  ModelConfig c = tiny();
  c.dropout = 0.3;
  const RmaatModel model(c, 10);
  const auto tokens = random_tokens(6, 10);
  const std::vector<double> mask(6, 1.0);
  auto run = [&](std::uint64_t example, std::size_t segment) {
    DropoutContext ctx{0.3, 99, example};
    Tape tape(false);
    const auto bound = model.bind(tape, false);
    return segment_forward(bound, tokens, mask, bound.memory_init, segment, &ctx).block_out.value();
  };
  CHECK(run(1, 0) == run(1, 0));
  CHECK_FALSE(run(1, 0) == run(2, 0));
  CHECK_FALSE(run(1, 0) == run(1, 1));
}

TEST_CASE("model config JSON round-trips") {
  ModelConfig c = tiny();
  c.alpha = 0.3;
  c.dropout = 0.1;
  CHECK(ModelConfig::from_json(c.to_json()) == c);
  CHECK_THROWS_AS(ModelConfig::from_json("{}"), InvalidArgument);
}

TEST_CASE("checkpoint round-trips parameters and config") {
  ModelConfig c = tiny();
  c.n_heads = 2;
  const RmaatModel model(c, 11);
  const auto path = std::filesystem::temp_directory_path() / "astroseq_model_test.ckpt";
  save_checkpoint(path, model);
  const RmaatModel back = load_checkpoint(path);
  CHECK(back.config() == model.config());
  REQUIRE(back.params().size() == model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    CHECK(back.params().name(i) == model.params().name(i));
    CHECK(back.params()[i] == model.params()[i]);
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("parameter set rejects mismatched layouts") {
  ModelConfig c = tiny();
  const RmaatModel model(c, 12);
  ParameterSet p = model.params();
  p[p.index_of("head.w")] = Matrix(3, 3);
  CHECK_THROWS_AS(RmaatModel(c, p), ShapeError);
  CHECK_THROWS_AS(p.index_of("nope"), InvalidArgument);
}
