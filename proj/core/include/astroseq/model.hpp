// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "astroseq/attention.hpp"
#include "astroseq/matrix.hpp"
#include "astroseq/retention.hpp"
#include "astroseq/tape.hpp"

namespace astroseq::model {

inline constexpr int kPadToken = 0;

struct ModelConfig {
  std::size_t d = 16;
  std::size_t m = 12;
  std::size_t n_heads = 1;
  std::size_t ffn_dim = 32;
  std::size_t n_layers = 1;
  std::size_t n_mem_tokens = 2;  // M
  std::size_t seg_len = 8;       // N_seg
  std::size_t n_segments = 2;    // T
  double dropout = 0.0;
  std::size_t vocab_size = 16;
  std::size_t n_classes = 2;
  double alpha = 0.25;
  double pos_scale = 2.0;

  void validate() const;
  attention::AttentionConfig attention_config() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter matrices in a fixed insertion order.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t index_of(const std::string& name) const;
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Matrix& operator[](std::size_t i) { return values_.at(i); }
  const Matrix& operator[](std::size_t i) const { return values_.at(i); }
  std::span<Matrix> values() noexcept { return values_; }
  std::span<const Matrix> values() const noexcept { return values_; }
  std::size_t float_count() const noexcept;
  /// Zero matrices shaped like every parameter.
  std::vector<Matrix> zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

struct LayerVars {
  attention::AttentionVars attn;
  Var ln1_gain, ln1_bias;
  Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Var ln2_gain, ln2_bias;
};

class RmaatModel;

/// A model's parameters bound as leaves of one tape. `leaves` follows the
/// ParameterSet order so leaf gradients map straight back to parameters.
struct BoundModel {
  const RmaatModel* model = nullptr;
  std::vector<Var> leaves;
  Var embedding;
  Var memory_init;
  std::vector<LayerVars> layers;
  Var head_w, head_b;
};

class RmaatModel {
 public:
  RmaatModel(ModelConfig config, std::uint64_t seed);
  RmaatModel(ModelConfig config, ParameterSet params);

  const ModelConfig& config() const noexcept { return config_; }
  const attention::AttentionConfig& attention_config() const noexcept { return attn_cfg_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  std::size_t memory_init_index() const noexcept { return memory_init_; }

  BoundModel bind(Tape& tape, bool requires_grad = true) const;

 private:
  void register_layout();

  ModelConfig config_;
  attention::AttentionConfig attn_cfg_;
  ParameterSet params_;
  std::size_t memory_init_ = 0;
};

/// A sequence cut into T segments of exactly N_seg ids (the last right-padded).
struct SegmentBatch {
  std::vector<std::vector<int>> tokens;
  /// 1 for real tokens, 0 for padding, per segment.
  std::vector<std::vector<double>> masks;
  /// Optional per-segment targets (-1 = none) and the whole-sequence target.
  std::vector<int> segment_labels;
  int final_label = -1;

  std::size_t n_segments() const noexcept { return tokens.size(); }
};

SegmentBatch split_segments(std::span<const int> sequence, std::size_t seg_len, std::size_t n_segments);

/// Inverted-dropout masks keyed by (seed, example, segment, layer, site) so
/// the no-grad forward and the replayed segment draw identical masks.
struct DropoutContext {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t example = 0;
};

struct SegmentOutput {
  Var block_out;     // (N_seg + M) x d
  Var o_t;           // N_seg x d
  Var mem_next_raw;  // M x d (invalid when M = 0)
};

/// Embeds x_t, appends the memory rows and runs every encoder layer:
/// astro_attention -> add&norm -> FFN -> add&norm (post-norm).
SegmentOutput segment_forward(const BoundModel& bound, std::span<const int> tokens,
                              std::span<const double> mask, Var mem, std::size_t segment_index,
                              const DropoutContext* dropout = nullptr);

/// factor(t) * mem_next_raw, t is 1-based.
Var apply_retention(Var mem_next_raw, const RetentionSchedule& schedule, std::size_t t);

/// Mean-pools the non-pad sequence rows and the memory rows of a segment
/// output and projects to n_classes logits (1 x C).
Var classify(const BoundModel& bound, const SegmentOutput& out, std::span<const double> mask);

}  // namespace astroseq::model
