// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/tasks.hpp"

#include <algorithm>
#include <sstream>

#include "astroseq/errors.hpp"
#include "astroseq/rng.hpp"

namespace astroseq::tasks {

TaskKind parse_task_kind(std::string_view s) {
  if (s == "copy") return TaskKind::copy;
  if (s == "kv_retrieval") return TaskKind::kv_retrieval;
  if (s == "listops_mini") return TaskKind::listops_mini;
  throw InvalidArgument("unknown task kind '" + std::string(s) + "'");
}

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::copy: return "copy";
    case TaskKind::kv_retrieval: return "kv_retrieval";
    case TaskKind::listops_mini: return "listops_mini";
  }
  return "?";
}

void TaskSpec::validate() const {
  if (n_classes < 2) throw InvalidArgument("task needs at least 2 classes");
  switch (kind) {
    case TaskKind::copy:
      if (length < 2) throw InvalidArgument("copy task needs length >= 2");
      if (length > 2 && alphabet_size == 0) throw InvalidArgument("copy task needs a noise alphabet");
      break;
    case TaskKind::kv_retrieval:
      if (n_pairs == 0) throw InvalidArgument("kv_retrieval needs n_pairs >= 1");
      if (alphabet_size < n_pairs) throw InvalidArgument("kv_retrieval needs alphabet_size >= n_pairs distinct keys");
      if (length < 2 * n_pairs + 2) {
        throw InvalidArgument("kv_retrieval length " + std::to_string(length) + " cannot hold " +
                              std::to_string(n_pairs) + " pairs and the query");
      }
      break;
    case TaskKind::listops_mini:
      if (n_classes != 10) throw InvalidArgument("listops_mini has exactly 10 classes");
      if (max_args < 2) throw InvalidArgument("listops_mini needs max_args >= 2");
      if (max_depth < 1) throw InvalidArgument("listops_mini needs max_depth >= 1");
      if (length < 4) throw InvalidArgument("listops_mini needs length >= 4");
      break;
  }
}

std::size_t TaskSpec::vocab_size() const {
  if (kind == TaskKind::listops_mini) return static_cast<std::size_t>(kOpSum) + 1;
  return static_cast<std::size_t>(kFirstClassToken) + n_classes + alphabet_size;
}

namespace {

int noise_token(const TaskSpec& spec, Rng& rng) {
  return kFirstClassToken + static_cast<int>(spec.n_classes + uniform_index(rng, spec.alphabet_size));
}

// Label at position 0, noise, query marker last.
Example make_copy(const TaskSpec& spec, Rng& rng, int label) {
  Example ex;
  ex.label = label;
  ex.tokens.resize(spec.length);
  ex.tokens[0] = kFirstClassToken + label;
  for (std::size_t i = 1; i + 1 < spec.length; ++i) ex.tokens[i] = noise_token(spec, rng);
  ex.tokens[spec.length - 1] = kQuery;
  return ex;
}

// "k v" pairs at the start, noise filler, then "QUERY k" at the end.
Example make_kv(const TaskSpec& spec, Rng& rng, int label) {
  std::vector<int> keys(spec.alphabet_size);
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < spec.n_pairs; ++i) {
    std::swap(keys[i], keys[i + uniform_index(rng, keys.size() - i)]);
  }
  const std::size_t queried = uniform_index(rng, spec.n_pairs);
  Example ex;
  ex.label = label;
  ex.tokens.resize(spec.length);
  const int key_base = kFirstClassToken + static_cast<int>(spec.n_classes);
  for (std::size_t p = 0; p < spec.n_pairs; ++p) {
    const int value = p == queried ? label : static_cast<int>(uniform_index(rng, spec.n_classes));
    ex.tokens[2 * p] = key_base + keys[p];
    ex.tokens[2 * p + 1] = kFirstClassToken + value;
  }
  for (std::size_t i = 2 * spec.n_pairs; i + 2 < spec.length; ++i) ex.tokens[i] = noise_token(spec, rng);
  ex.tokens[spec.length - 2] = kQuery;
  ex.tokens[spec.length - 1] = key_base + keys[queried];
  return ex;
}

int apply_op(int op, std::vector<int> args) {
  switch (op) {
    case kOpMin: return *std::min_element(args.begin(), args.end());
    case kOpMax: return *std::max_element(args.begin(), args.end());
    case kOpMed:
      std::sort(args.begin(), args.end());
      return args[(args.size() - 1) / 2];
    case kOpSum: {
      int s = 0;
      for (int a : args) s += a;
      return s % 10;
    }
    default: throw InvalidArgument("not a listops operator token: " + std::to_string(op));
  }
}

// Random prefix expression within `budget` tokens.
void gen_expr(Rng& rng, std::size_t depth, std::size_t budget, std::size_t max_args, std::vector<int>& out) {
  if (depth == 0 || budget < 5) {
    out.push_back(kFirstClassToken + static_cast<int>(uniform_index(rng, 10)));
    return;
  }
  const std::size_t cap = std::min(max_args, budget - 3);
  const std::size_t n_args = 2 + uniform_index(rng, cap - 1);
  out.push_back(kOpen);
  out.push_back(kOpMin + static_cast<int>(uniform_index(rng, 4)));
  std::size_t remaining = budget - 3;
  for (std::size_t a = 0; a < n_args; ++a) {
    const std::size_t reserve = n_args - a - 1;
    const std::size_t share = remaining - reserve;
    const bool nest = uniform01(rng) < 0.35;
    const std::size_t before = out.size();
    gen_expr(rng, nest ? depth - 1 : 0, share, max_args, out);
    remaining -= out.size() - before;
  }
  out.push_back(kClose);
}

Example make_listops(const TaskSpec& spec, Rng& rng, int label) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<int> expr;
    gen_expr(rng, spec.max_depth, spec.length, spec.max_args, expr);
    if (expr.size() < 3) continue;
    if (listops_eval(expr) != label) continue;
    Example ex;
    ex.label = label;
    ex.tokens = std::move(expr);
    return ex;
  }
  throw Error("listops_mini: rejection sampling failed to hit label " + std::to_string(label));
}

}  // namespace

Example make_example(const TaskSpec& spec, std::uint64_t split, std::size_t index) {
  Rng rng = make_rng(spec.seed, Stream::data, split, index);
  const int label = static_cast<int>(index % spec.n_classes);
  switch (spec.kind) {
    case TaskKind::copy: return make_copy(spec, rng, label);
    case TaskKind::kv_retrieval: return make_kv(spec, rng, label);
    case TaskKind::listops_mini: return make_listops(spec, rng, label);
  }
  throw InvalidArgument("unknown task kind");
}

std::vector<Example> generate(const TaskSpec& spec, std::size_t count, std::uint64_t split) {
  spec.validate();
  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_example(spec, split, i));
  return out;
}

namespace {

int eval_at(std::span<const int> tokens, std::size_t& pos) {
  if (pos >= tokens.size()) throw InvalidArgument("listops: unexpected end of expression");
  const int tok = tokens[pos++];
  if (tok >= kFirstClassToken && tok < kFirstClassToken + 10) return tok - kFirstClassToken;
  if (tok != kOpen) throw InvalidArgument("listops: unexpected token " + std::to_string(tok));
  if (pos >= tokens.size()) throw InvalidArgument("listops: missing operator");
  const int op = tokens[pos++];
  std::vector<int> args;
  while (pos < tokens.size() && tokens[pos] != kClose) args.push_back(eval_at(tokens, pos));
  if (pos >= tokens.size()) throw InvalidArgument("listops: missing ']'");
  ++pos;
  if (args.empty()) throw InvalidArgument("listops: operator without arguments");
  return apply_op(op, std::move(args));
}

}  // namespace

int listops_eval(std::span<const int> tokens) {
  std::size_t end = tokens.size();
  while (end > 0 && tokens[end - 1] == kPad) --end;
  const auto body = tokens.first(end);
  std::size_t pos = 0;
  const int v = eval_at(body, pos);
  if (pos != body.size()) throw InvalidArgument("listops: trailing tokens after expression");
  return v;
}

std::vector<int> listops_tokenize(std::string_view text) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n') {
      ++i;
    } else if (c == '[') {
      out.push_back(kOpen);
      ++i;
    } else if (c == ']') {
      out.push_back(kClose);
      ++i;
    } else if (c >= '0' && c <= '9') {
      out.push_back(kFirstClassToken + (c - '0'));
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && text[j] >= 'A' && text[j] <= 'Z') ++j;
      const std::string_view word = text.substr(i, j - i);
      if (word == "MIN") out.push_back(kOpMin);
      else if (word == "MAX") out.push_back(kOpMax);
      else if (word == "MED") out.push_back(kOpMed);
      else if (word == "SM") out.push_back(kOpSum);
      else throw InvalidArgument("listops: unknown symbol '" + std::string(text.substr(i, std::max<std::size_t>(j - i, 1))) + "'");
      i = j;
    }
  }
  return out;
}

int listops_eval(std::string_view text) { return listops_eval(std::span<const int>(listops_tokenize(text))); }

std::string listops_to_text(std::span<const int> tokens) {
  std::ostringstream out;
  bool first = true;
  for (int t : tokens) {
    if (t == kPad) continue;
    if (!first && t != kClose) out << ' ';
    first = false;
    if (t >= kFirstClassToken && t < kFirstClassToken + 10) out << (t - kFirstClassToken);
    else if (t == kOpen) { out << '['; first = true; continue; }
    else if (t == kClose) out << ']';
    else if (t == kOpMin) out << "MIN";
    else if (t == kOpMax) out << "MAX";
    else if (t == kOpMed) out << "MED";
    else if (t == kOpSum) out << "SM";
    else out << '?';
  }
  return out.str();
}

}  // namespace astroseq::tasks
