// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/tape.hpp"

#include <vector>

#include "astroseq/errors.hpp"

namespace astroseq {

const Matrix& Var::value() const {
  if (!tape_) throw InvalidArgument("use of an unbound Var");
  return tape_->nodes_[id_].value;
}

const Matrix& Var::grad() const {
  if (!tape_) throw InvalidArgument("use of an unbound Var");
  return tape_->nodes_[id_].grad;
}

bool Var::requires_grad() const {
  if (!tape_) throw InvalidArgument("use of an unbound Var");
  return tape_->nodes_[id_].requires_grad;
}

Tape::Tape(bool grad_enabled, FloatMeter* meter) : grad_enabled_(grad_enabled), meter_(meter) {}

Tape::~Tape() { uncount(stored_); }

void Tape::count(std::size_t n) {
  stored_ += n;
  if (meter_) meter_->add(n);
}

void Tape::uncount(std::size_t n) {
  stored_ -= n;
  if (meter_) meter_->release(n);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this) throw InvalidArgument("Var belongs to a different tape");
  if (consumed_ && !nodes_[v.id_].is_leaf) {
    throw TapeConsumed("tape intermediates were released by a non-retaining backward");
  }
}

Var Tape::leaf(Matrix value, bool requires_grad, LeafKind kind) {
  Node node;
  node.is_leaf = true;
  node.requires_grad = requires_grad && grad_enabled_;
  node.counted = kind == LeafKind::input;
  if (node.requires_grad) node.grad = Matrix(value.rows(), value.cols());
  const std::size_t floats = value.size() + node.grad.size();
  node.value = std::move(value);
  if (node.counted) count(floats);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardRule rule) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(rule));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardRule rule) {
  Node node;
  node.counted = true;
  bool any = false;
  for (const Var& p : parents) {
    check_owned(p);
    any = any || nodes_[p.id_].requires_grad;
  }
  if (grad_enabled_ && any) {
    node.requires_grad = true;
    node.parents.reserve(parents.size());
    for (const Var& p : parents) node.parents.push_back(p.id_);
    node.rule = std::move(rule);
  }
  count(value.size());
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var root, const Matrix& seed, bool retain) {
  if (consumed_) throw TapeConsumed("backward called on a consumed tape (use retain=true)");
  if (root.tape_ != this) throw InvalidArgument("backward root belongs to a different tape");
  const Node& root_node = nodes_[root.id_];
  if (!seed.same_shape(root_node.value)) {
    throw ShapeError("backward seed " + seed.shape_string() + " does not match node " +
                     root_node.value.shape_string());
  }

  std::vector<Matrix> adj(root.id_ + 1);
  std::size_t adj_floats = 0;
  auto alloc = [&](std::size_t i) {
    if (adj[i].empty() && nodes_[i].value.size() > 0) {
      adj[i] = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
      adj_floats += adj[i].size();
      count(adj[i].size());
    }
  };
  auto free_slot = [&](std::size_t i) {
    adj_floats -= adj[i].size();
    uncount(adj[i].size());
    adj[i] = Matrix();
  };

  if (root_node.requires_grad) {
    alloc(root.id_);
    adj[root.id_] += seed;
  }

  std::vector<const Matrix*> in;
  std::vector<Matrix*> in_grad;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    if (adj[i].empty()) continue;
    Node& node = nodes_[i];
    if (node.is_leaf) {
      if (node.requires_grad) node.grad += adj[i];
      free_slot(i);
      continue;
    }
    in.clear();
    in_grad.clear();
    for (std::size_t p : node.parents) {
      in.push_back(&nodes_[p].value);
      if (nodes_[p].requires_grad) {
        alloc(p);
        in_grad.push_back(&adj[p]);
      } else {
        in_grad.push_back(nullptr);
      }
    }
    node.rule(BackwardArgs{adj[i], node.value, in, in_grad});
    free_slot(i);
  }
  (void)adj_floats;

  if (!retain) {
    for (Node& node : nodes_) {
      if (node.is_leaf) continue;
      if (node.counted) uncount(node.value.size());
      node.counted = false;
      node.value = Matrix();
      node.rule = nullptr;
      node.parents.clear();
    }
    consumed_ = true;
  }
}

void Tape::zero_grad() {
  for (Node& node : nodes_) {
    if (node.is_leaf && node.requires_grad) node.grad.fill(0.0);
  }
}

}  // namespace astroseq
