// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "astroseq/neuroglia.hpp"

namespace astroseq {

/// Per-segment memory retention factors. Derived schedules are normalized LTP
/// increments (they sum to one); the uniform schedule is all ones and stands
/// for "no retention scaling".
struct RetentionSchedule {
  std::size_t n_segments = 0;
  std::vector<double> factors;
  /// "uniform", or "ltp" with the macro-model text and its hash.
  std::string source_kind = "uniform";
  std::string source_hash;
  std::string source_params;

  /// Factor for 1-based segment t.
  double factor(std::size_t t) const;

  std::string to_json() const;
  static RetentionSchedule from_json(const std::string& text);

  friend bool operator==(const RetentionSchedule&, const RetentionSchedule&) = default;
};

/// Increments of the synapse-averaged p_l between consecutive cycle
/// boundaries, one per segment.
std::vector<double> ltp_increments(const neuroglia::SimTrace& trace, long long n_segments);

/// increments[t] / sum(increments). Throws DegenerateSchedule when the sum is
/// not strictly positive.
std::vector<double> normalize_increments(const std::vector<double>& increments);

/// Runs the LTP macro model for n_segments cycles and normalizes its
/// increments.
RetentionSchedule retention_schedule(long long n_segments, const neuroglia::MacroSpec& macro);

RetentionSchedule uniform_schedule(long long n_segments);

/// Stable key of a (macro spec, T) pair.
std::string schedule_cache_key(long long n_segments, const neuroglia::MacroSpec& macro);

/// Disk cache of derived schedules keyed by schedule_cache_key().
class ScheduleCache {
 public:
  explicit ScheduleCache(std::filesystem::path dir);

  /// Returns the cached schedule, computing and storing it on a miss.
  RetentionSchedule get(long long n_segments, const neuroglia::MacroSpec& macro);
  bool contains(long long n_segments, const neuroglia::MacroSpec& macro) const;
  std::filesystem::path path_for(long long n_segments, const neuroglia::MacroSpec& macro) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace astroseq
