// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace astroseq::tasks {

// Shared token ids. Class tokens start at kFirstClassToken.
inline constexpr int kPad = 0;
inline constexpr int kQuery = 1;
inline constexpr int kKeyMarker = 2;
inline constexpr int kFirstClassToken = 3;

enum class TaskKind { copy, kv_retrieval, listops_mini };
TaskKind parse_task_kind(std::string_view s);
std::string to_string(TaskKind k);

struct TaskSpec {
  TaskKind kind = TaskKind::copy;
  /// Noise symbols (copy), key symbols (kv_retrieval); ignored by listops_mini.
  std::size_t alphabet_size = 8;
  std::size_t length = 16;
  std::size_t n_classes = 4;  // listops_mini requires 10
  std::size_t n_pairs = 2;    // kv_retrieval only
  std::size_t max_depth = 2;  // listops_mini only
  std::size_t max_args = 4;   // listops_mini only
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t vocab_size() const;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct Example {
  std::vector<int> tokens;
  int label = 0;
};

/// Deterministic in (spec.seed, split, index). Labels cycle through the
/// classes so every split is exactly balanced.
Example make_example(const TaskSpec& spec, std::uint64_t split, std::size_t index);
std::vector<Example> generate(const TaskSpec& spec, std::size_t count, std::uint64_t split = 0);

inline constexpr std::uint64_t kTrainSplit = 0;
inline constexpr std::uint64_t kValidationSplit = 1;

// listops_mini token ids, after the ten digit tokens.
inline constexpr int kOpen = kFirstClassToken + 10;
inline constexpr int kClose = kOpen + 1;
inline constexpr int kOpMin = kOpen + 2;
inline constexpr int kOpMax = kOpen + 3;
inline constexpr int kOpMed = kOpen + 4;
inline constexpr int kOpSum = kOpen + 5;

/// Evaluates a token sequence (trailing padding allowed).
int listops_eval(std::span<const int> tokens);
/// Evaluates text such as "[MAX 2 4 1]" (operators MIN, MAX, MED, SM).
int listops_eval(std::string_view text);
std::vector<int> listops_tokenize(std::string_view text);
std::string listops_to_text(std::span<const int> tokens);

}  // namespace astroseq::tasks
