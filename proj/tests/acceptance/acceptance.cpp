// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   astroseq_acceptance              run every criterion
//   astroseq_acceptance --criterion N

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "astroseq/attention.hpp"
#include "astroseq/config.hpp"
#include "astroseq/harness.hpp"
#include "astroseq/neuroglia.hpp"
#include "astroseq/retention.hpp"
#include "astroseq/rng.hpp"
#include "astroseq/trainer.hpp"
#include "attention_oracle.hpp"
#include "gradcheck.hpp"
#include "primitive_cases.hpp"

using namespace astroseq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

model::ModelConfig tiny_model(std::size_t T) {
  model::ModelConfig c;
  c.d = 8;
  c.m = 6;
  c.ffn_dim = 16;
  c.n_mem_tokens = 2;
  c.seg_len = 8;
  c.n_segments = T;
  c.vocab_size = 12;
  c.n_classes = 3;
  return c;
}

model::SegmentBatch random_batch(const model::ModelConfig& c, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::data);
  std::vector<int> seq(c.seg_len * c.n_segments);
  for (int& v : seq) v = 1 + static_cast<int>(uniform_index(rng, c.vocab_size - 1));
  auto b = model::split_segments(seq, c.seg_len, c.n_segments);
  b.final_label = static_cast<int>(uniform_index(rng, c.n_classes));
  // Odd seeds also supervise every segment.
  if (seed % 2 == 1) {
    for (auto& l : b.segment_labels) l = static_cast<int>(uniform_index(rng, c.n_classes));
  }
  return b;
}

Outcome gradient_equivalence() {
  double worst = 0.0;
  std::size_t runs = 0;
  for (std::size_t T : {2, 4, 8}) {
    const auto c = tiny_model(T);
    const auto schedule = retention_schedule(static_cast<long long>(T), neuroglia::MacroSpec{});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const model::RmaatModel m(c, seed);
      const auto batch = random_batch(c, seed);
      const auto a = trainer::amrb_rollout(m, batch, schedule);
      const auto b = trainer::bptt_rollout(m, batch, schedule);
      for (std::size_t i = 0; i < a.grads.size(); ++i) worst = std::max(worst, max_scaled_error(a.grads[i], b.grads[i]));
      ++runs;
    }
  }
  return {worst <= 1e-10, fmt("worst relative gradient error %.3g over %zu rollouts (limit 1e-10)", worst, runs)};
}

Outcome memory_efficiency() {
  const std::size_t T = 8;
  const auto c = tiny_model(T);
  const model::RmaatModel m(c, 0);
  const auto schedule = retention_schedule(static_cast<long long>(T), neuroglia::MacroSpec{});
  const auto a = trainer::memory_report(trainer::RolloutKind::amrb, m, schedule);
  const auto b = trainer::memory_report(trainer::RolloutKind::bptt, m, schedule);
  const double ratio = static_cast<double>(b.backward_peak) / static_cast<double>(a.backward_peak);
  return {ratio >= static_cast<double>(T) / 2.0,
          fmt("backward peak floats BPTT %zu / AMRB %zu = %.2f at T=8 (need >= 4)", b.backward_peak, a.backward_peak,
              ratio)};
}

Outcome retention_schedule_properties() {
  const neuroglia::MacroSpec macro;
  std::ostringstream detail;
  bool ok = true;
  for (long long T : {2, 4, 6, 8}) {
    const auto s = retention_schedule(T, macro);
    double sum = 0.0;
    bool positive = true, monotone = true;
    for (std::size_t t = 0; t < s.factors.size(); ++t) {
      sum += s.factors[t];
      positive = positive && s.factors[t] > 0.0;
      if (t > 0) monotone = monotone && s.factors[t] <= s.factors[t - 1];
    }
    const bool this_ok = std::abs(sum - 1.0) <= 1e-12 && positive && monotone && s.factors.size() == std::size_t(T);
    ok = ok && this_ok;
    detail << "T=" << T << (this_ok ? " ok" : " BAD") << " (sum-1=" << fmt("%.1e", sum - 1.0) << "); ";
  }
  const auto geometry = neuroglia::build_geometry(static_cast<long long>(macro.neurons), macro.spacing);
  const auto trace =
      neuroglia::run_stp_cycles(macro.params, geometry, macro.scale, 8, macro.cycle_seconds, macro.drive);
  const auto inc = ltp_increments(trace, 8);
  bool saturating = true;
  for (std::size_t i = 0; i + 1 < inc.size(); ++i) saturating = saturating && inc[i + 1] < inc[i];
  ok = ok && saturating;
  detail << "LTP increments " << (saturating ? "strictly decreasing" : "NOT decreasing") << " over 8 cycles at dt="
         << macro.params.dt;
  return {ok, detail.str()};
}

Outcome attention_oracle_equivalence() {
  double worst = 0.0;
  std::size_t max_n = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = make_rng(seed, Stream::validation, 4);
    attention::AttentionConfig cfg;
    cfg.d = 8;
    cfg.m = 8;
    cfg.n_heads = std::size_t{1} << uniform_index(rng, 3);
    const std::size_t n = 1 + uniform_index(rng, 64);
    cfg.n_max = n;
    max_n = std::max(max_n, n);
    const auto params = attention::AttentionParams::init(cfg, rng);
    const Matrix x = normal_matrix(rng, n, cfg.d, 1.0);
    // Every third seed pads a random tail.
    std::vector<double> mask;
    Matrix mask_col;
    if (seed % 3 == 2 && n > 1) {
      const std::size_t valid = 1 + uniform_index(rng, n - 1);
      mask.assign(n, 0.0);
      std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(valid), 1.0);
      mask_col = Matrix(n, 1);
      for (std::size_t i = 0; i < n; ++i) mask_col(i, 0) = mask[i];
    }
    Tape tape(false);
    const auto vars = attention::bind(tape, params, false);
    const Matrix fast =
        attention::astro_attention(tape.constant(x), vars, cfg, {}, mask.empty() ? nullptr : &mask_col).value();
    const Matrix loop = testing::attention_loop(x, params, cfg, mask);
    worst = std::max(worst, max_scaled_error(fast, loop));
  }
  return {worst <= 1e-12,
          fmt("worst relative error %.3g over 50 seeds, N <= %zu, 1/2/4 heads (limit 1e-12)", worst, max_n)};
}

Outcome numerical_gradients() {
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& c : testing::primitive_cases(seed)) {
      const double e = testing::gradcheck(c.f, c.inputs, seed);
      ++checks;
      if (e >= worst) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  for (std::size_t heads : {1, 2}) {
    attention::AttentionConfig cfg;
    cfg.d = 4;
    cfg.m = 4;
    cfg.n_heads = heads;
    cfg.n_max = 5;
    Rng rng = make_rng(heads, Stream::validation, 5);
    const auto p = attention::AttentionParams::init(cfg, rng);
    std::vector<Matrix> inputs{normal_matrix(rng, 5, 4, 1.0), p.w_k, p.w_q, p.w_v, p.m_proj, p.w_rel};
    if (heads > 1) inputs.push_back(p.w_o);
    const double e = testing::gradcheck(
        [cfg, heads](Tape&, std::span<const Var> v) {
          attention::AttentionVars vars{v[1], v[2], v[3], v[4], v[5], heads > 1 ? v[6] : Var()};
          return attention::astro_attention(v[0], vars, cfg);
        },
        inputs, 40 + heads);
    ++checks;
    if (e >= worst) {
      worst = e;
      worst_name = heads > 1 ? "attention block (2 heads)" : "attention block";
    }
  }
  return {worst < 1e-6, fmt("%zu checks, worst relative error %.3g (%s), limit 1e-6", checks, worst, worst_name.c_str())};
}

Outcome linear_scaling() {
  // d = m = 16 keeps the N^2 term of the softmax reference dominant from N = 128.
  const std::size_t d = 16, m = 16, rounds = 7;
  const std::vector<std::size_t> sizes{128, 256, 512, 1024};
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> astro(sizes.size(), kInf), soft(sizes.size(), kInf);
  // Sweep the sizes in interleaved rounds so a burst of host contention
  // cannot land on a single N.
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      astro[i] = std::min(astro[i], harness::time_astro_attention(sizes[i], d, m, 1, 0));
      soft[i] = std::min(soft[i], harness::time_softmax_reference(sizes[i], d, m, 1, 0));
    }
  }
  bool ok = true;
  std::ostringstream detail;
  detail << "per-doubling ratios astro [";
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const double r = astro[i] / astro[i - 1];
    ok = ok && r >= 1.6 && r <= 2.6;
    detail << fmt(i > 1 ? " %.2f" : "%.2f", r);
  }
  detail << "] in [1.6, 2.6], softmax [";
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const double r = soft[i] / soft[i - 1];
    ok = ok && r >= 3.2 && r <= 5.2;
    detail << fmt(i > 1 ? " %.2f" : "%.2f", r);
  }
  detail << "] in [3.2, 5.2]";
  return {ok, detail.str()};
}

RunConfig copy_run(std::size_t mem, std::size_t val_size) {
  RunConfig c;
  c.seed = 0;
  c.model.n_mem_tokens = mem;
  c.model.seg_len = 8;
  c.model.n_segments = 2;
  c.task.kind = tasks::TaskKind::copy;
  c.task.length = 16;
  c.task.n_classes = 4;
  c.task.alphabet_size = 8;
  c.train.epochs = 30;
  c.train.val_size = val_size;
  c.validate();
  return c;
}

Outcome end_to_end_learning() {
  const auto with_memory = harness::train(copy_run(4, 256)).record;
  // A larger validation set keeps sampling noise well inside the 5-point band.
  const auto without = harness::train(copy_run(0, 1024)).record;
  std::size_t reached = 0;
  for (const auto& e : with_memory.epochs) {
    if (e.val_acc > 0.95) {
      reached = e.epoch;
      break;
    }
  }
  const double chance = 0.25;
  double worst_gap = 0.0;
  for (const auto& e : without.epochs) worst_gap = std::max(worst_gap, std::abs(e.val_acc - chance));
  const bool ok = reached > 0 && worst_gap <= 0.05;
  return {ok, fmt("M=4 best val acc %.3f (first > 0.95 at epoch %zu); M=0 max |acc - 0.25| = %.3f over 30 epochs",
                  with_memory.best_val_acc(), reached, worst_gap)};
}

Outcome retention_ablation() {
  std::vector<double> derived, uniform;
  for (std::uint64_t seed : {0, 1, 2}) {
    for (ScheduleKind kind : {ScheduleKind::derived, ScheduleKind::uniform}) {
      RunConfig c;
      c.seed = seed;
      c.model.n_mem_tokens = 4;
      c.model.seg_len = 8;
      c.model.n_segments = 8;
      c.task.kind = tasks::TaskKind::kv_retrieval;
      c.task.length = 64;
      c.task.n_pairs = 2;
      c.task.n_classes = 4;
      c.train.epochs = 30;
      c.train.schedule = kind;
      c.validate();
      const double acc = harness::train(c).record.final_val_acc();
      (kind == ScheduleKind::derived ? derived : uniform).push_back(acc);
    }
  }
  const double md = median(derived), mu = median(uniform);
  return {md >= mu, fmt("median val acc derived %.3f (%.3f %.3f %.3f) vs uniform %.3f (%.3f %.3f %.3f)", md, derived[0],
                        derived[1], derived[2], mu, uniform[0], uniform[1], uniform[2])};
}

Outcome spatial_modulation() {
  neuroglia::SimParams p;
  p.b = 0.1;
  const auto g = neuroglia::build_geometry(5, 1.0);
  const auto trace = neuroglia::run_stp_cycles(p, g, 2.0, 1, 50.0, neuroglia::DriveSpec{});
  auto peak = [&](std::size_t i, std::size_t j) {
    double v = -1e300;
    for (const auto& s : trace.p_s_series) v = std::max(v, s[g.synapse_index(i, j)]);
    return v;
  };
  // Corners of the synapse grid whose midpoints lie at the ends of the neuron line.
  const double center = peak(2, 2), c00 = peak(0, 0), c44 = peak(4, 4);
  return {center > c00 && center > c44,
          fmt("peak p_s center (2,2) %.4g vs corners (0,0) %.4g, (4,4) %.4g", center, c00, c44)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient equivalence", 60, gradient_equivalence},
      {2, "memory efficiency", 60, memory_efficiency},
      {3, "retention schedule", 120, retention_schedule_properties},
      {4, "attention oracle equivalence", 30, attention_oracle_equivalence},
      {5, "numerical gradients", 60, numerical_gradients},
      {6, "linear scaling", 120, linear_scaling},
      {7, "end-to-end learning", 600, end_to_end_learning},
      {8, "retention ablation", 1800, retention_ablation},
      {9, "spatial STP modulation", 60, spatial_modulation},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s; %.1f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : " TIME LIMIT EXCEEDED");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
