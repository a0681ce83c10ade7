// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "astroseq/errors.hpp"

namespace astroseq {

ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "derived") return ScheduleKind::derived;
  if (s == "uniform") return ScheduleKind::uniform;
  throw ConfigError("schedule must be 'derived' or 'uniform', got '" + std::string(s) + "'");
}

std::string to_string(ScheduleKind k) { return k == ScheduleKind::derived ? "derived" : "uniform"; }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::uint64_t to_u64(std::string_view v, std::size_t line, std::string_view key) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(where(line) + std::string(key) + " expects a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double to_double(std::string_view v, std::size_t line, std::string_view key) {
  const std::string s(v);
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ConfigError(where(line) + std::string(key) + " expects a number, got '" + s + "'");
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  try {
    resolved_model().validate();
    resolved_task().validate();
    retention.params.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (task.length > model.seg_len * model.n_segments) {
    throw ConfigError("task length " + std::to_string(task.length) + " exceeds seg_len * n_segments = " +
                      std::to_string(model.seg_len * model.n_segments));
  }
  if (train.epochs == 0 || train.train_size == 0 || train.val_size == 0 || train.batch_size == 0) {
    throw ConfigError("epochs, train_size, val_size and batch_size must be positive");
  }
  if (!(train.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(train.weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

model::ModelConfig RunConfig::resolved_model() const {
  model::ModelConfig m = model;
  m.vocab_size = task.vocab_size();
  m.n_classes = task.n_classes;
  return m;
}

tasks::TaskSpec RunConfig::resolved_task() const {
  tasks::TaskSpec t = task;
  t.seed = seed;
  return t;
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::string section;
  std::string retention_text;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where(line_no) + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "model" && section != "task" && section != "train" && section != "retention") {
        throw ConfigError(where(line_no) + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where(line_no) + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));
    auto u = [&] { return static_cast<std::size_t>(to_u64(val, line_no, key)); };
    auto f = [&] { return to_double(val, line_no, key); };
    auto unknown = [&] {
      return ConfigError(where(line_no) + "unknown key '" + std::string(key) + "'" +
                         (section.empty() ? std::string() : " in [" + section + "]"));
    };
    if (section.empty()) {
      if (key == "seed") c.seed = to_u64(val, line_no, key);
      else throw unknown();
    } else if (section == "model") {
      auto& m = c.model;
      if (key == "d") m.d = u();
      else if (key == "m") m.m = u();
      else if (key == "n_heads") m.n_heads = u();
      else if (key == "ffn_dim") m.ffn_dim = u();
      else if (key == "n_layers") m.n_layers = u();
      else if (key == "n_mem_tokens") m.n_mem_tokens = u();
      else if (key == "seg_len") m.seg_len = u();
      else if (key == "n_segments") m.n_segments = u();
      else if (key == "dropout") m.dropout = f();
      else if (key == "alpha") m.alpha = f();
      else if (key == "pos_scale") m.pos_scale = f();
      else throw unknown();
    } else if (section == "task") {
      auto& t = c.task;
      if (key == "kind") {
        try {
          t.kind = tasks::parse_task_kind(val);
        } catch (const Error& e) {
          throw ConfigError(where(line_no) + e.what());
        }
      } else if (key == "alphabet_size") t.alphabet_size = u();
      else if (key == "length") t.length = u();
      else if (key == "n_classes") t.n_classes = u();
      else if (key == "n_pairs") t.n_pairs = u();
      else if (key == "max_depth") t.max_depth = u();
      else if (key == "max_args") t.max_args = u();
      else throw unknown();
    } else if (section == "train") {
      auto& t = c.train;
      if (key == "epochs") t.epochs = u();
      else if (key == "train_size") t.train_size = u();
      else if (key == "val_size") t.val_size = u();
      else if (key == "batch_size") t.batch_size = u();
      else if (key == "lr") t.lr = f();
      else if (key == "weight_decay") t.weight_decay = f();
      else if (key == "schedule") t.schedule = parse_schedule_kind(val);
      else throw unknown();
    } else {
      retention_text.append(key).append(" = ").append(val).append("\n");
    }
  }
  if (!retention_text.empty()) {
    try {
      c.retention = neuroglia::parse_macro_spec(retention_text, c.retention);
    } catch (const Error& e) {
      throw ConfigError(std::string("[retention]: ") + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& c) {
  std::ostringstream out;
  out << "seed = " << c.seed << "\n\n[model]\n";
  const auto& m = c.model;
  out << "d = " << m.d << "\nm = " << m.m << "\nn_heads = " << m.n_heads << "\nffn_dim = " << m.ffn_dim
      << "\nn_layers = " << m.n_layers << "\nn_mem_tokens = " << m.n_mem_tokens << "\nseg_len = " << m.seg_len
      << "\nn_segments = " << m.n_segments << "\ndropout = " << fmt(m.dropout) << "\nalpha = " << fmt(m.alpha)
      << "\npos_scale = " << fmt(m.pos_scale) << "\n\n[task]\n";
  const auto& t = c.task;
  out << "kind = " << tasks::to_string(t.kind) << "\nalphabet_size = " << t.alphabet_size << "\nlength = " << t.length
      << "\nn_classes = " << t.n_classes << "\nn_pairs = " << t.n_pairs << "\nmax_depth = " << t.max_depth
      << "\nmax_args = " << t.max_args << "\n\n[train]\n";
  const auto& tr = c.train;
  out << "epochs = " << tr.epochs << "\ntrain_size = " << tr.train_size << "\nval_size = " << tr.val_size
      << "\nbatch_size = " << tr.batch_size << "\nlr = " << fmt(tr.lr) << "\nweight_decay = " << fmt(tr.weight_decay)
      << "\nschedule = " << to_string(tr.schedule) << "\n\n[retention]\n";
  out << neuroglia::to_text(c.retention);
  return out.str();
}

}  // namespace astroseq
