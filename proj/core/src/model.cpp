// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/model.hpp"

#include <cmath>

#include <json.hpp>

#include "astroseq/errors.hpp"
#include "astroseq/ops.hpp"
#include "astroseq/rng.hpp"

namespace astroseq::model {

using json = nlohmann::json;

void ModelConfig::validate() const {
  if (d == 0 || m == 0 || ffn_dim == 0 || n_layers == 0) throw InvalidArgument("model dimensions must be positive");
  if (seg_len == 0) throw InvalidArgument("seg_len must be >= 1");
  if (n_segments == 0) throw InvalidArgument("n_segments must be >= 1");
  if (vocab_size < 2) throw InvalidArgument("vocab_size must be >= 2 (pad plus one symbol)");
  if (n_classes == 0) throw InvalidArgument("n_classes must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
  attention_config().validate();
}

attention::AttentionConfig ModelConfig::attention_config() const {
  attention::AttentionConfig a;
  a.d = d;
  a.m = m;
  a.n_heads = n_heads;
  a.n_max = seg_len + n_mem_tokens;
  a.alpha = alpha;
  a.pos_scale = pos_scale;
  return a;
}

std::string ModelConfig::to_json() const {
  json j = {{"d", d},
            {"m", m},
            {"n_heads", n_heads},
            {"ffn_dim", ffn_dim},
            {"n_layers", n_layers},
            {"n_mem_tokens", n_mem_tokens},
            {"seg_len", seg_len},
            {"n_segments", n_segments},
            {"dropout", dropout},
            {"vocab_size", vocab_size},
            {"n_classes", n_classes},
            {"alpha", alpha},
            {"pos_scale", pos_scale}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    c.d = j.at("d");
    c.m = j.at("m");
    c.n_heads = j.at("n_heads");
    c.ffn_dim = j.at("ffn_dim");
    c.n_layers = j.at("n_layers");
    c.n_mem_tokens = j.at("n_mem_tokens");
    c.seg_len = j.at("seg_len");
    c.n_segments = j.at("n_segments");
    c.dropout = j.at("dropout");
    c.vocab_size = j.at("vocab_size");
    c.n_classes = j.at("n_classes");
    c.alpha = j.at("alpha");
    c.pos_scale = j.at("pos_scale");
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed model config JSON: ") + e.what());
  }
  return c;
}

std::size_t ParameterSet::add(std::string name, Matrix value) {
  for (const auto& n : names_) {
    if (n == name) throw InvalidArgument("duplicate parameter '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

std::size_t ParameterSet::float_count() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::vector<Matrix> ParameterSet::zeros_like() const {
  std::vector<Matrix> z;
  z.reserve(values_.size());
  for (const auto& v : values_) z.emplace_back(v.rows(), v.cols());
  return z;
}

namespace {

std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

}  // namespace

RmaatModel::RmaatModel(ModelConfig config, std::uint64_t seed)
    : config_(config), attn_cfg_(config.attention_config()) {
  config_.validate();
  Rng rng = make_rng(seed, Stream::init);
  const double d = static_cast<double>(config_.d);
  params_.add("embedding", normal_matrix(rng, config_.vocab_size, config_.d, 1.0));
  memory_init_ = params_.add("memory_init", normal_matrix(rng, config_.n_mem_tokens, config_.d, 1.0));
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    attention::AttentionParams a = attention::AttentionParams::init(attn_cfg_, rng);
    params_.add(p + "attn.w_k", std::move(a.w_k));
    params_.add(p + "attn.w_q", std::move(a.w_q));
    params_.add(p + "attn.w_v", std::move(a.w_v));
    params_.add(p + "attn.m_proj", std::move(a.m_proj));
    params_.add(p + "attn.w_rel", std::move(a.w_rel));
    if (config_.n_heads > 1) params_.add(p + "attn.w_o", std::move(a.w_o));
    params_.add(p + "ln1.gain", Matrix(1, config_.d, 1.0));
    params_.add(p + "ln1.bias", Matrix(1, config_.d, 0.0));
    const double a1 = 1.0 / std::sqrt(d);
    const double a2 = 1.0 / std::sqrt(static_cast<double>(config_.ffn_dim));
    params_.add(p + "ffn.w1", uniform_matrix(rng, config_.d, config_.ffn_dim, -a1, a1));
    params_.add(p + "ffn.b1", Matrix(1, config_.ffn_dim, 0.0));
    params_.add(p + "ffn.w2", uniform_matrix(rng, config_.ffn_dim, config_.d, -a2, a2));
    params_.add(p + "ffn.b2", Matrix(1, config_.d, 0.0));
    params_.add(p + "ln2.gain", Matrix(1, config_.d, 1.0));
    params_.add(p + "ln2.bias", Matrix(1, config_.d, 0.0));
  }
  const double ah = 1.0 / std::sqrt(d);
  params_.add("head.w", uniform_matrix(rng, config_.d, config_.n_classes, -ah, ah));
  params_.add("head.b", Matrix(1, config_.n_classes, 0.0));
  register_layout();
}

RmaatModel::RmaatModel(ModelConfig config, ParameterSet params)
    : config_(config), attn_cfg_(config.attention_config()), params_(std::move(params)) {
  config_.validate();
  register_layout();
}

void RmaatModel::register_layout() {
  // Validates that a ParameterSet matches the configured architecture.
  auto expect = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    const Matrix& m = params_[params_.index_of(name)];
    if (m.rows() != rows || m.cols() != cols) {
      throw ShapeError("parameter '" + name + "' is " + m.shape_string() + ", expected " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
  };
  const auto& c = config_;
  expect("embedding", c.vocab_size, c.d);
  expect("memory_init", c.n_mem_tokens, c.d);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    expect(p + "attn.w_k", c.d, c.m);
    expect(p + "attn.w_q", c.d, c.m);
    expect(p + "attn.w_v", c.d, c.d);
    expect(p + "attn.m_proj", attn_cfg_.n_max, attn_cfg_.n_max);
    expect(p + "attn.w_rel", attn_cfg_.n_max, c.m);
    if (c.n_heads > 1) expect(p + "attn.w_o", c.d, c.d);
    expect(p + "ffn.w1", c.d, c.ffn_dim);
    expect(p + "ffn.w2", c.ffn_dim, c.d);
  }
  expect("head.w", c.d, c.n_classes);
  memory_init_ = params_.index_of("memory_init");
}

BoundModel RmaatModel::bind(Tape& tape, bool requires_grad) const {
  BoundModel b;
  b.model = this;
  b.leaves.reserve(params_.size());
  for (const Matrix& m : params_.values()) b.leaves.push_back(tape.leaf(m, requires_grad, LeafKind::parameter));
  auto at = [&](const std::string& name) { return b.leaves[params_.index_of(name)]; };
  b.embedding = at("embedding");
  b.memory_init = at("memory_init");
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    LayerVars lv;
    lv.attn.w_k = at(p + "attn.w_k");
    lv.attn.w_q = at(p + "attn.w_q");
    lv.attn.w_v = at(p + "attn.w_v");
    lv.attn.m_proj = at(p + "attn.m_proj");
    lv.attn.w_rel = at(p + "attn.w_rel");
    if (config_.n_heads > 1) lv.attn.w_o = at(p + "attn.w_o");
    lv.ln1_gain = at(p + "ln1.gain");
    lv.ln1_bias = at(p + "ln1.bias");
    lv.ffn_w1 = at(p + "ffn.w1");
    lv.ffn_b1 = at(p + "ffn.b1");
    lv.ffn_w2 = at(p + "ffn.w2");
    lv.ffn_b2 = at(p + "ffn.b2");
    lv.ln2_gain = at(p + "ln2.gain");
    lv.ln2_bias = at(p + "ln2.bias");
    b.layers.push_back(lv);
  }
  b.head_w = at("head.w");
  b.head_b = at("head.b");
  return b;
}

SegmentBatch split_segments(std::span<const int> sequence, std::size_t seg_len, std::size_t n_segments) {
  if (seg_len == 0 || n_segments == 0) throw InvalidArgument("split_segments: seg_len and T must be >= 1");
  if (sequence.size() > seg_len * n_segments) {
    throw InvalidArgument("split_segments: sequence of length " + std::to_string(sequence.size()) +
                          " exceeds N_seg * T = " + std::to_string(seg_len * n_segments));
  }
  SegmentBatch batch;
  batch.tokens.assign(n_segments, std::vector<int>(seg_len, kPadToken));
  batch.masks.assign(n_segments, std::vector<double>(seg_len, 0.0));
  batch.segment_labels.assign(n_segments, -1);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    batch.tokens[i / seg_len][i % seg_len] = sequence[i];
    batch.masks[i / seg_len][i % seg_len] = 1.0;
  }
  return batch;
}

namespace {

Var dropout(Var x, const DropoutContext* ctx, std::size_t segment, std::size_t layer, std::size_t site) {
  if (!ctx || ctx->rate <= 0.0) return x;
  Rng rng = make_rng(ctx->seed, Stream::dropout, ctx->example, (segment << 16) | (layer << 4) | site);
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 - ctx->rate;
  for (double& v : mask.data()) v = uniform01(rng) < keep ? 1.0 / keep : 0.0;
  return ad::hadamard(x, x.tape().constant(std::move(mask)));
}

Var affine_norm(Var x, Var gain, Var bias) {
  Var y = ad::layer_norm(x);
  return ad::add(ad::hadamard(y, ad::broadcast_row(gain, x.rows())), ad::broadcast_row(bias, x.rows()));
}

}  // namespace

SegmentOutput segment_forward(const BoundModel& bound, std::span<const int> tokens,
                              std::span<const double> mask, Var mem, std::size_t segment_index,
                              const DropoutContext* dropout_ctx) {
  const RmaatModel& model = *bound.model;
  const ModelConfig& cfg = model.config();
  if (tokens.size() != cfg.seg_len || mask.size() != cfg.seg_len) {
    throw ShapeError("segment_forward: segment has " + std::to_string(tokens.size()) + " tokens, expected " +
                     std::to_string(cfg.seg_len));
  }
  const std::size_t mem_rows = cfg.n_mem_tokens;
  if (mem_rows > 0 && (!mem.valid() || mem.rows() != mem_rows || mem.cols() != cfg.d)) {
    throw ShapeError("segment_forward: memory must be " + std::to_string(mem_rows) + "x" + std::to_string(cfg.d));
  }

  Var x = ad::gather_rows(bound.embedding, tokens);
  if (mem_rows > 0) x = ad::concat_rows(x, mem);
  const std::size_t n = x.rows();

  bool padded = false;
  Matrix row_mask(n, 1, 1.0);
  for (std::size_t i = 0; i < cfg.seg_len; ++i) {
    row_mask(i, 0) = mask[i];
    padded = padded || mask[i] == 0.0;
  }

  const auto& acfg = model.attention_config();
  for (std::size_t l = 0; l < bound.layers.size(); ++l) {
    const LayerVars& lv = bound.layers[l];
    Var attn = attention::astro_attention(x, lv.attn, acfg, {}, padded ? &row_mask : nullptr);
    attn = dropout(attn, dropout_ctx, segment_index, l, 0);
    Var h1 = affine_norm(attn, lv.ln1_gain, lv.ln1_bias);
    Var hidden = ad::gelu(ad::add(ad::matmul(h1, lv.ffn_w1), ad::broadcast_row(lv.ffn_b1, n)));
    hidden = dropout(hidden, dropout_ctx, segment_index, l, 1);
    Var ffn = ad::add(ad::matmul(hidden, lv.ffn_w2), ad::broadcast_row(lv.ffn_b2, n));
    x = affine_norm(ad::add(h1, ffn), lv.ln2_gain, lv.ln2_bias);
  }

  SegmentOutput out;
  out.block_out = x;
  out.o_t = mem_rows > 0 ? ad::slice_rows(x, 0, cfg.seg_len) : x;
  if (mem_rows > 0) out.mem_next_raw = ad::slice_rows(x, cfg.seg_len, mem_rows);
  return out;
}

Var apply_retention(Var mem_next_raw, const RetentionSchedule& schedule, std::size_t t) {
  return ad::scalar_mul(mem_next_raw, schedule.factor(t));
}

Var classify(const BoundModel& bound, const SegmentOutput& out, std::span<const double> mask) {
  const ModelConfig& cfg = bound.model->config();
  const std::size_t n = out.block_out.rows();
  Matrix weights(1, n, 0.0);
  double count = 0.0;
  for (std::size_t i = 0; i < cfg.seg_len; ++i) count += mask[i];
  count += static_cast<double>(cfg.n_mem_tokens);
  if (count == 0.0) throw InvalidArgument("classify: segment has no rows to pool");
  for (std::size_t i = 0; i < cfg.seg_len; ++i) weights(0, i) = mask[i] / count;
  for (std::size_t i = cfg.seg_len; i < n; ++i) weights(0, i) = 1.0 / count;
  Tape& tape = out.block_out.tape();
  Var pooled = ad::matmul(tape.constant(std::move(weights)), out.block_out);
  return ad::add(ad::matmul(pooled, bound.head_w), bound.head_b);
}

}  // namespace astroseq::model
