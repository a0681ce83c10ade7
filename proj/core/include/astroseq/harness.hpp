// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "astroseq/config.hpp"
#include "astroseq/model.hpp"
#include "astroseq/retention.hpp"
#include "astroseq/tasks.hpp"
#include "astroseq/trainer.hpp"

namespace astroseq::harness {

inline constexpr int kRunRecordSchema = 1;
inline constexpr const char* kVersion = "0.1.0";

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  std::string config_text;
  std::string content_hash;
  RetentionSchedule schedule;
  trainer::MemoryReport memory;
  std::vector<EpochMetrics> epochs;
  std::string status = "ok";
  std::string abort_reason;

  double final_val_acc() const { return epochs.empty() ? 0.0 : epochs.back().val_acc; }
  double best_val_acc() const;
  /// Wall-clock fields are dropped when include_timing is false, which makes
  /// records of identical runs compare equal.
  std::string to_json(bool include_timing = true) const;
  std::string to_csv() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;    // empty: write nothing
  std::filesystem::path cache_dir;  // empty: schedules are not cached
  std::ostream* log = nullptr;
};

struct TrainResult {
  RunRecord record;
  std::optional<model::RmaatModel> model;
};

/// Derived (LTP) or uniform schedule for the configured T.
RetentionSchedule resolve_schedule(const RunConfig& config, const std::filesystem::path& cache_dir = {});

model::SegmentBatch to_batch(const tasks::Example& example, const model::ModelConfig& config);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t count = 0;
};

EvalResult evaluate(const model::RmaatModel& model, const std::vector<tasks::Example>& data,
                    const RetentionSchedule& schedule);

/// Epochs of amrb_rollout + AdamW with validation after every epoch. On a
/// numerical failure the partial record is written (when out_dir is set)
/// and the error is rethrown.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

// Timing ---------------------------------------------------------------------

/// Seconds per gradient-free astro_attention forward on a random n x d input,
/// the best of `reps` samples that each average enough calls to span 20 ms.
/// R is precomputed since it does not depend on X.
double time_astro_attention(std::size_t n, std::size_t d, std::size_t m, std::size_t reps, std::uint64_t seed);
/// Same measurement for the quadratic softmax reference.
double time_softmax_reference(std::size_t n, std::size_t d, std::size_t m, std::size_t reps, std::uint64_t seed);

struct BenchRow {
  std::string kind;  // astro_attention | softmax_reference | amrb | bptt
  std::size_t size = 0;  // N for attention, T for rollouts
  double seconds = 0.0;
  std::size_t backward_peak_floats = 0;
};

struct BenchOptions {
  std::vector<std::size_t> attention_sizes = {128, 256, 512, 1024};
  std::vector<std::size_t> rollout_segments = {2, 4, 8};
  std::size_t reps = 5;
};

std::vector<BenchRow> bench(const RunConfig& config, const BenchOptions& options = {});
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace astroseq::harness
