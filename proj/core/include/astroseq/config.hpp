// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "astroseq/model.hpp"
#include "astroseq/neuroglia.hpp"
#include "astroseq/tasks.hpp"

namespace astroseq {

enum class ScheduleKind { derived, uniform };
ScheduleKind parse_schedule_kind(std::string_view s);
std::string to_string(ScheduleKind k);

struct TrainSettings {
  std::size_t epochs = 30;
  std::size_t train_size = 512;
  std::size_t val_size = 256;
  std::size_t batch_size = 16;
  double lr = 3e-3;
  double weight_decay = 0.01;
  ScheduleKind schedule = ScheduleKind::derived;

  friend bool operator==(const TrainSettings&, const TrainSettings&) = default;
};

/// One experiment. Text form:
///
///   seed = 0
///   [model]   d, m, n_heads, ffn_dim, n_layers, n_mem_tokens, seg_len,
///             n_segments, dropout, alpha, pos_scale
///   [task]    kind, alphabet_size, length, n_classes, n_pairs, max_depth, max_args
///   [train]   epochs, train_size, val_size, batch_size, lr, weight_decay, schedule
///   [retention]  macro-model keys (tau_n, ..., cycle_seconds, drive_hz)
///
/// The model's vocab_size and n_classes follow from the task.
struct RunConfig {
  std::uint64_t seed = 0;
  model::ModelConfig model;
  tasks::TaskSpec task;
  TrainSettings train;
  neuroglia::MacroSpec retention;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  /// Model config with vocab_size/n_classes taken from the task.
  model::ModelConfig resolved_model() const;
  /// Task spec with its seed taken from the run seed.
  tasks::TaskSpec resolved_task() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ConfigError on unknown sections/keys or malformed values.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

}  // namespace astroseq
