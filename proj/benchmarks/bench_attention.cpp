// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "astroseq/attention.hpp"
#include "astroseq/rng.hpp"
#include "astroseq/tape.hpp"

namespace {

using namespace astroseq;
using namespace astroseq::attention;

constexpr std::size_t kD = 64;
constexpr std::size_t kM = 64;

AttentionConfig config(std::size_t n) {
  AttentionConfig cfg;
  cfg.d = kD;
  cfg.m = kM;
  cfg.n_max = n;
  return cfg;
}

void BM_AstroAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = config(n);
  Rng rng = make_rng(0, Stream::init);
  const auto params = AttentionParams::init(cfg, rng);
  const Matrix x = normal_matrix(rng, n, kD, 1.0);
  Tape setup(false);
  const auto setup_vars = bind(setup, params, false);
  const Matrix r = positional_matrix(n, setup_vars, cfg).value();
  for (auto _ : state) {
    Tape tape(false);
    const auto vars = bind(tape, params, false);
    const Var out = astro_attention(tape.constant(x), vars, cfg, {}, nullptr, tape.constant(r));
    benchmark::DoNotOptimize(out.value().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AstroAttention)->RangeMultiplier(2)->Range(128, 1024)->Complexity(benchmark::oN);

void BM_SoftmaxReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = config(n);
  Rng rng = make_rng(0, Stream::init);
  const auto params = AttentionParams::init(cfg, rng);
  const Matrix x = normal_matrix(rng, n, kD, 1.0);
  for (auto _ : state) {
    const Matrix out = softmax_attention_reference(x, params);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SoftmaxReference)->RangeMultiplier(2)->Range(128, 1024)->Complexity(benchmark::oNSquared);

}  // namespace
