// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0
//
// astroseq command-line front end.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "astroseq/checkpoint.hpp"
#include "astroseq/config.hpp"
#include "astroseq/errors.hpp"
#include "astroseq/harness.hpp"
#include "astroseq/neuroglia.hpp"
#include "astroseq/retention.hpp"
#include "astroseq/rng.hpp"
#include "astroseq/tasks.hpp"
#include "astroseq/trainer.hpp"

namespace fs = std::filesystem;
using namespace astroseq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

RunConfig load_run_config(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::optional<long long> neurons;
  long long cycles = 6;
  std::optional<double> cycle_seconds, dt, scale, drive_hz;
  std::string params_path;
  std::string out;
};

int run_simulate(const Globals& g, const SimulateArgs& a) {
  neuroglia::MacroSpec spec = g.config_path.empty() ? neuroglia::MacroSpec{} : load_run_config(g).retention;
  if (!a.params_path.empty()) spec = neuroglia::load_macro_spec(a.params_path, spec);
  if (a.neurons) {
    if (*a.neurons < 1) throw InvalidArgument("--neurons must be >= 1");
    spec.neurons = static_cast<std::size_t>(*a.neurons);
  }
  if (a.cycle_seconds) spec.cycle_seconds = *a.cycle_seconds;
  if (a.dt) spec.params.dt = *a.dt;
  if (a.scale) spec.scale = *a.scale;
  if (a.drive_hz) spec.drive.rate_hz = *a.drive_hz;
  spec.params.validate();

  const auto geom = neuroglia::build_geometry(static_cast<long long>(spec.neurons), spec.spacing);
  const auto trace =
      neuroglia::run_stp_cycles(spec.params, geom, spec.scale, a.cycles, spec.cycle_seconds, spec.drive);

  const fs::path out = a.out.empty() ? fs::path(g.out_dir) / "simulation.csv" : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw Error("cannot write " + out.string());
  const std::size_t n = trace.n_neurons;
  csv << "time";
  for (const char* var : {"s", "p_s", "p_l"}) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) csv << ',' << var << '_' << i << '_' << j;
    }
  }
  csv << '\n';
  for (std::size_t k = 0; k < trace.samples(); ++k) {
    csv << fmt(trace.times[k]);
    for (const auto* series : {&trace.s_series, &trace.p_s_series, &trace.p_l_series}) {
      for (double v : (*series)[k]) csv << ',' << fmt(v);
    }
    csv << '\n';
  }
  nlohmann::json side = {{"cycle_boundaries", trace.cycle_boundaries},
                         {"cycle_seconds", spec.cycle_seconds},
                         {"dt", spec.params.dt},
                         {"n_neurons", n}};
  fs::path side_path = out;
  side_path.replace_extension(".boundaries.json");
  write_file(side_path, side.dump(2) + "\n");
  std::cout << "wrote " << out.string() << " (" << trace.samples() << " samples) and " << side_path.string() << "\n";
  return kExitOk;
}

// retention ------------------------------------------------------------------

struct RetentionArgs {
  long long segments = 8;
  bool uniform = false;
  std::string out;
};

int run_retention(const Globals& g, const RetentionArgs& a) {
  const neuroglia::MacroSpec spec = g.config_path.empty() ? neuroglia::MacroSpec{} : load_run_config(g).retention;
  RetentionSchedule schedule;
  if (a.uniform) {
    schedule = uniform_schedule(a.segments);
  } else {
    ScheduleCache cache(fs::path(g.out_dir) / "schedule_cache");
    schedule = cache.get(a.segments, spec);
  }
  const std::string text = schedule.to_json();
  if (!a.out.empty()) write_file(a.out, text + "\n");
  std::cout << text << "\n";
  return kExitOk;
}

// gradcheck ------------------------------------------------------------------

struct GradcheckArgs {
  long long segments = 4;
  std::string mode = "both";
};

int run_gradcheck(const Globals& g, const GradcheckArgs& a) {
  if (a.segments < 1) throw InvalidArgument("--segments must be >= 1");
  const std::uint64_t seed = g.seed.value_or(0);
  model::ModelConfig cfg;
  cfg.d = 8;
  cfg.m = 6;
  cfg.n_mem_tokens = 2;
  cfg.seg_len = 8;
  cfg.ffn_dim = 16;
  cfg.vocab_size = 12;
  cfg.n_classes = 4;
  cfg.n_segments = static_cast<std::size_t>(a.segments);
  const model::RmaatModel mdl(cfg, seed);
  const RetentionSchedule schedule = retention_schedule(a.segments, neuroglia::MacroSpec{});
  Rng rng = make_rng(seed, Stream::data);
  std::vector<int> seq(cfg.seg_len * cfg.n_segments - 3);
  for (int& id : seq) id = 1 + static_cast<int>(uniform_index(rng, cfg.vocab_size - 1));
  model::SegmentBatch batch = model::split_segments(seq, cfg.seg_len, cfg.n_segments);
  batch.final_label = static_cast<int>(seed % cfg.n_classes);

  nlohmann::json out = {{"segments", a.segments}, {"seed", seed}, {"mode", a.mode}};
  std::optional<trainer::GradReport> amrb, bptt;
  if (a.mode == "amrb" || a.mode == "both") amrb = trainer::amrb_rollout(mdl, batch, schedule);
  if (a.mode == "bptt" || a.mode == "both") bptt = trainer::bptt_rollout(mdl, batch, schedule);
  if (amrb) out["amrb_memory_report"] = nlohmann::json::parse(amrb->memory.to_json());
  if (bptt) out["bptt_memory_report"] = nlohmann::json::parse(bptt->memory.to_json());
  if (amrb && bptt) {
    double worst = 0.0;
    for (std::size_t i = 0; i < amrb->grads.size(); ++i) {
      worst = std::max(worst, max_scaled_error(amrb->grads[i], bptt->grads[i]));
    }
    out["max_relative_discrepancy"] = worst;
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// train / bench / eval ---------------------------------------------------------

int run_train(const Globals& g) {
  if (g.config_path.empty()) throw ConfigError("train requires --config <file>");
  const RunConfig c = load_run_config(g);
  harness::TrainOptions opt;
  opt.out_dir = g.out_dir;
  opt.cache_dir = fs::path(g.out_dir) / "schedule_cache";
  opt.log = &std::cout;
  const auto result = harness::train(c, opt);
  std::cout << "final val_acc " << result.record.final_val_acc() << ", record in "
            << (fs::path(g.out_dir) / "run_record.json").string() << "\n";
  return kExitOk;
}

int run_bench(const Globals& g, std::size_t reps) {
  const RunConfig c = load_run_config(g);
  harness::BenchOptions opt;
  opt.reps = reps;
  const std::string csv = harness::bench_csv(harness::bench(c, opt));
  write_file(fs::path(g.out_dir) / "bench.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int run_eval(const Globals& g, const std::string& checkpoint) {
  if (g.config_path.empty()) throw ConfigError("eval requires --config <file>");
  const RunConfig c = load_run_config(g);
  const fs::path ckpt = checkpoint.empty() ? fs::path(g.out_dir) / "model.ckpt" : fs::path(checkpoint);
  const model::RmaatModel mdl = load_checkpoint(ckpt);
  if (!(mdl.config() == c.resolved_model())) throw ConfigError("checkpoint architecture does not match --config");
  const RetentionSchedule schedule = harness::resolve_schedule(c, fs::path(g.out_dir) / "schedule_cache");
  const auto val = tasks::generate(c.resolved_task(), c.train.val_size, tasks::kValidationSplit);
  const auto r = harness::evaluate(mdl, val, schedule);
  nlohmann::json out = {{"schema", harness::kRunRecordSchema}, {"val_acc", r.accuracy}, {"val_loss", r.loss},
                        {"count", r.count}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"astroseq: recurrent astromorphic sequence models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Run configuration file");
  app.add_option("--seed", g.seed, "Override the run seed");
  app.add_option("--out-dir", g.out_dir, "Directory for outputs")->capture_default_str();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run the neuron-astrocyte macro model");
  simulate->add_option("--neurons", sim.neurons);
  simulate->add_option("--cycles", sim.cycles)->capture_default_str();
  simulate->add_option("--cycle-seconds", sim.cycle_seconds);
  simulate->add_option("--dt", sim.dt);
  simulate->add_option("--scale", sim.scale);
  simulate->add_option("--drive-hz", sim.drive_hz);
  simulate->add_option("--params", sim.params_path, "key = value parameter file");
  simulate->add_option("--out", sim.out, "CSV output path");

  RetentionArgs ret;
  auto* retention = app.add_subcommand("retention", "Derive a memory retention schedule");
  retention->add_option("--segments", ret.segments)->capture_default_str();
  retention->add_flag("--uniform", ret.uniform, "Emit the all-ones schedule");
  retention->add_option("--out", ret.out, "JSON output path");

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare AMRB and BPTT gradients on a tiny model");
  gradcheck->add_option("--segments", gc.segments)->capture_default_str();
  gradcheck->add_option("--mode", gc.mode)->check(CLI::IsMember({"amrb", "bptt", "both"}))->capture_default_str();

  auto* train = app.add_subcommand("train", "Train on a synthetic task");

  std::size_t reps = 5;
  auto* bench = app.add_subcommand("bench", "Time attention and rollouts");
  bench->add_option("--reps", reps)->capture_default_str();

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the validation split");
  eval->add_option("--checkpoint", checkpoint);

  for (auto* sub : {simulate, retention, gradcheck, train, bench, eval}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "astroseq: error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (*simulate) return run_simulate(g, sim);
    if (*retention) return run_retention(g, ret);
    if (*gradcheck) return run_gradcheck(g, gc);
    if (*train) return run_train(g);
    if (*bench) return run_bench(g, reps);
    if (*eval) return run_eval(g, checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "astroseq: invalid config: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const InvalidArgument& e) {
    std::cerr << "astroseq: invalid argument: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NumericalOverflow& e) {
    std::cerr << "astroseq: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const TrainingAbort& e) {
    std::cerr << "astroseq: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "astroseq: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "astroseq: error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
