// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/retention.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "astroseq/errors.hpp"
#include "astroseq/rng.hpp"

namespace astroseq {

using json = nlohmann::json;

double RetentionSchedule::factor(std::size_t t) const {
  if (t < 1 || t > n_segments) {
    throw InvalidArgument("retention factor index " + std::to_string(t) + " outside 1.." +
                          std::to_string(n_segments));
  }
  return factors[t - 1];
}

std::string RetentionSchedule::to_json() const {
  json source = {{"kind", source_kind}};
  if (!source_hash.empty()) source["params_hash"] = source_hash;
  if (!source_params.empty()) source["params"] = source_params;
  json j = {{"n_segments", n_segments}, {"factors", factors}, {"source", source}};
  return j.dump(2);
}

RetentionSchedule RetentionSchedule::from_json(const std::string& text) {
  RetentionSchedule s;
  try {
    const json j = json::parse(text);
    s.n_segments = j.at("n_segments").get<std::size_t>();
    s.factors = j.at("factors").get<std::vector<double>>();
    const json& src = j.at("source");
    s.source_kind = src.at("kind").get<std::string>();
    s.source_hash = src.value("params_hash", "");
    s.source_params = src.value("params", "");
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed retention schedule JSON: ") + e.what());
  }
  if (s.factors.size() != s.n_segments) throw InvalidArgument("schedule factor count mismatch");
  return s;
}

std::vector<double> ltp_increments(const neuroglia::SimTrace& trace, long long n_segments) {
  if (n_segments < 1) throw InvalidArgument("ltp_increments: n_segments must be >= 1");
  const auto t_count = static_cast<std::size_t>(n_segments);
  if (trace.cycle_boundaries.size() < t_count + 1) {
    throw InvalidArgument("ltp_increments: trace has " +
                          std::to_string(trace.cycle_boundaries.size() - 1) + " cycles, need " +
                          std::to_string(t_count));
  }
  std::vector<double> inc(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    inc[t] = trace.mean_p_l(trace.cycle_boundaries[t + 1]) - trace.mean_p_l(trace.cycle_boundaries[t]);
  }
  return inc;
}

std::vector<double> normalize_increments(const std::vector<double>& increments) {
  double total = 0.0;
  for (double v : increments) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateSchedule("LTP increments sum to " + std::to_string(total) +
                             "; the drive produced no long-term accumulation");
  }
  std::vector<double> f(increments.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = increments[i] / total;
  return f;
}

RetentionSchedule retention_schedule(long long n_segments, const neuroglia::MacroSpec& macro) {
  if (n_segments < 1) throw InvalidArgument("retention_schedule: n_segments must be >= 1");
  const auto geometry = neuroglia::build_geometry(static_cast<long long>(macro.neurons), macro.spacing);
  const auto trace = neuroglia::run_stp_cycles(macro.params, geometry, macro.scale, n_segments,
                                               macro.cycle_seconds, macro.drive);
  RetentionSchedule s;
  s.n_segments = static_cast<std::size_t>(n_segments);
  s.factors = normalize_increments(ltp_increments(trace, n_segments));
  for (double f : s.factors) {
    if (!(f > 0.0)) throw DegenerateSchedule("LTP increment is not strictly positive");
  }
  s.source_kind = "ltp";
  s.source_params = neuroglia::to_text(macro);
  s.source_hash = hex64(fnv1a(s.source_params));
  return s;
}

RetentionSchedule uniform_schedule(long long n_segments) {
  if (n_segments < 1) throw InvalidArgument("uniform_schedule: n_segments must be >= 1");
  RetentionSchedule s;
  s.n_segments = static_cast<std::size_t>(n_segments);
  s.factors.assign(s.n_segments, 1.0);
  s.source_kind = "uniform";
  return s;
}

std::string schedule_cache_key(long long n_segments, const neuroglia::MacroSpec& macro) {
  return hex64(fnv1a("T=" + std::to_string(n_segments) + "\n" + neuroglia::to_text(macro)));
}

ScheduleCache::ScheduleCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ScheduleCache::path_for(long long n_segments,
                                              const neuroglia::MacroSpec& macro) const {
  return dir_ / ("retention-" + schedule_cache_key(n_segments, macro) + ".json");
}

bool ScheduleCache::contains(long long n_segments, const neuroglia::MacroSpec& macro) const {
  return std::filesystem::exists(path_for(n_segments, macro));
}

RetentionSchedule ScheduleCache::get(long long n_segments, const neuroglia::MacroSpec& macro) {
  const auto path = path_for(n_segments, macro);
  if (std::ifstream in{path}) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return RetentionSchedule::from_json(ss.str());
  }
  RetentionSchedule s = retention_schedule(n_segments, macro);
  std::filesystem::create_directories(dir_);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InvalidArgument("cannot write schedule cache at '" + tmp + "'");
    out << s.to_json() << "\n";
  }
  std::filesystem::rename(tmp, path);
  return s;
}

}  // namespace astroseq
