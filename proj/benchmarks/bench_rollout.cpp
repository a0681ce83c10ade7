// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "astroseq/retention.hpp"
#include "astroseq/rng.hpp"
#include "astroseq/trainer.hpp"

namespace {

using namespace astroseq;

model::ModelConfig config(std::size_t T) {
  model::ModelConfig c;
  c.n_segments = T;
  c.seg_len = 16;
  c.n_mem_tokens = 4;
  return c;
}

model::SegmentBatch batch_for(const model::ModelConfig& c) {
  Rng rng = make_rng(1, Stream::data);
  std::vector<int> seq(c.seg_len * c.n_segments);
  for (int& v : seq) v = 1 + static_cast<int>(uniform_index(rng, c.vocab_size - 1));
  auto b = model::split_segments(seq, c.seg_len, c.n_segments);
  b.final_label = 0;
  return b;
}

template <bool Amrb>
void BM_Rollout(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const auto c = config(T);
  const model::RmaatModel model(c, 0);
  const auto batch = batch_for(c);
  const auto schedule = uniform_schedule(static_cast<long long>(T));
  for (auto _ : state) {
    auto rep = Amrb ? trainer::amrb_rollout(model, batch, schedule) : trainer::bptt_rollout(model, batch, schedule);
    benchmark::DoNotOptimize(rep.grads.data());
    state.counters["backward_peak_floats"] = static_cast<double>(rep.memory.backward_peak);
  }
}
BENCHMARK(BM_Rollout<true>)->Name("BM_AmrbRollout")->RangeMultiplier(2)->Range(2, 16);
BENCHMARK(BM_Rollout<false>)->Name("BM_BpttRollout")->RangeMultiplier(2)->Range(2, 16);

}  // namespace
