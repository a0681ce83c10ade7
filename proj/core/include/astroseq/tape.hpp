// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "astroseq/matrix.hpp"

namespace astroseq {

/// Counts doubles held by tapes and replay buffers. Parameter storage is not
/// counted; activations, saved inputs, adjoints and buffered states are.
class FloatMeter {
 public:
  void add(std::size_t n) noexcept {
    current_ += n;
    if (current_ > peak_) peak_ = current_;
  }
  void release(std::size_t n) noexcept { current_ = n > current_ ? 0 : current_ - n; }
  void reset_peak() noexcept { peak_ = current_; }
  std::size_t current() const noexcept { return current_; }
  std::size_t peak() const noexcept { return peak_; }

 private:
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  const Matrix& value() const;
  /// Accumulated gradient of a leaf. Zero until a backward pass reaches it.
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct BackwardArgs {
  const Matrix& grad_out;
  const Matrix& out;
  std::span<const Matrix* const> in;
  /// Adjoint slots of the inputs; nullptr where an input needs no gradient.
  /// Rules must accumulate (+=), never assign.
  std::span<Matrix* const> in_grad;
};

using BackwardRule = std::function<void(const BackwardArgs&)>;

enum class LeafKind { input, parameter };

/// Append-only record of one differentiable region. Nodes are stored in
/// creation order, which is a topological order, so a backward pass is a
/// single reverse sweep.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true, FloatMeter* meter = nullptr);
  ~Tape();

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad, LeafKind kind = LeafKind::input);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Appends an interior node. When gradients are disabled, or no parent
  /// requires one, the rule is dropped.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardRule rule);
  Var record(Matrix value, std::span<const Var> parents, BackwardRule rule);

  /// Propagates `seed` (same shape as root) back to every reachable leaf and
  /// adds the result to the leaves' grad(). With retain=false the tape's
  /// intermediate values are released and any further backward throws
  /// TapeConsumed.
  void backward(Var root, const Matrix& seed, bool retain = false);

  void zero_grad();

  bool grad_enabled() const noexcept { return grad_enabled_; }
  bool consumed() const noexcept { return consumed_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  /// Doubles currently held by this tape (excluding parameter leaves).
  std::size_t stored_floats() const noexcept { return stored_; }

 private:
  friend class Var;

  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    BackwardRule rule;
    bool requires_grad = false;
    bool is_leaf = false;
    bool counted = false;
  };

  void check_owned(const Var& v) const;
  void count(std::size_t n);
  void uncount(std::size_t n);

  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool consumed_ = false;
  FloatMeter* meter_;
  std::size_t stored_ = 0;
};

}  // namespace astroseq
