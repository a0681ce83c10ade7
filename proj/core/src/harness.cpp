// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "astroseq/attention.hpp"
#include "astroseq/checkpoint.hpp"
#include "astroseq/errors.hpp"
#include "astroseq/optimizer.hpp"
#include "astroseq/rng.hpp"

namespace astroseq::harness {

using json = nlohmann::json;

double RunRecord::best_val_acc() const {
  double best = 0.0;
  for (const auto& e : epochs) best = std::max(best, e.val_acc);
  return best;
}

std::string RunRecord::to_json(bool include_timing) const {
  json epochs_j = json::array();
  for (const auto& e : epochs) {
    json row = {{"epoch", e.epoch},
                {"train_loss", e.train_loss},
                {"train_acc", e.train_acc},
                {"val_loss", e.val_loss},
                {"val_acc", e.val_acc}};
    if (include_timing) row["seconds"] = e.seconds;
    epochs_j.push_back(row);
  }
  json j = {{"schema", kRunRecordSchema},
            {"version", kVersion},
            {"content_hash", content_hash},
            {"config", config_text},
            {"schedule", json::parse(schedule.to_json())},
            {"memory_report", json::parse(memory.to_json())},
            {"epochs", epochs_j},
            {"status", status}};
  if (!abort_reason.empty()) j["abort_reason"] = abort_reason;
  return j.dump(2);
}

std::string RunRecord::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ',' << e.val_acc << ','
        << e.seconds << '\n';
  }
  return out.str();
}

RetentionSchedule resolve_schedule(const RunConfig& config, const std::filesystem::path& cache_dir) {
  const auto T = static_cast<long long>(config.model.n_segments);
  if (config.train.schedule == ScheduleKind::uniform) return uniform_schedule(T);
  if (cache_dir.empty()) return retention_schedule(T, config.retention);
  ScheduleCache cache(cache_dir);
  return cache.get(T, config.retention);
}

model::SegmentBatch to_batch(const tasks::Example& example, const model::ModelConfig& config) {
  model::SegmentBatch b = model::split_segments(example.tokens, config.seg_len, config.n_segments);
  b.final_label = example.label;
  return b;
}

namespace {

int argmax_row(const Matrix& logits) {
  const auto row = logits.row(0);
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

double cross_entropy_value(const Matrix& logits, int label) {
  const auto row = logits.row(0);
  const double mx = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double v : row) z += std::exp(v - mx);
  return std::log(z) + mx - row[static_cast<std::size_t>(label)];
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void persist(const RunRecord& record, const std::filesystem::path& out_dir) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "run_record.json", record.to_json() + "\n");
  write_text(out_dir / "learning_curve.csv", record.to_csv());
}

}  // namespace

EvalResult evaluate(const model::RmaatModel& model, const std::vector<tasks::Example>& data,
                    const RetentionSchedule& schedule) {
  EvalResult r;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    const Matrix logits = trainer::predict(model, to_batch(ex, model.config()), schedule);
    if (argmax_row(logits) == ex.label) ++correct;
    r.loss += cross_entropy_value(logits, ex.label);
  }
  r.count = data.size();
  if (r.count > 0) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
    r.loss /= static_cast<double>(r.count);
  }
  return r;
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const model::ModelConfig mcfg = config.resolved_model();
  const tasks::TaskSpec task = config.resolved_task();
  const std::string config_text = emit_config(config);

  TrainResult result;
  RunRecord& record = result.record;
  record.config_text = config_text;
  record.content_hash = hex64(fnv1a(config_text, fnv1a(kVersion)));
  record.schedule = resolve_schedule(config, options.cache_dir);

  model::RmaatModel model(mcfg, config.seed);
  record.memory = trainer::memory_report(trainer::RolloutKind::amrb, model, record.schedule, config.seed);

  const auto train_set = tasks::generate(task, config.train.train_size, tasks::kTrainSplit);
  const auto val_set = tasks::generate(task, config.train.val_size, tasks::kValidationSplit);
  std::vector<model::SegmentBatch> train_batches;
  train_batches.reserve(train_set.size());
  for (const auto& ex : train_set) train_batches.push_back(to_batch(ex, mcfg));

  AdamWConfig opt_cfg;
  opt_cfg.lr = config.train.lr;
  opt_cfg.weight_decay = config.train.weight_decay;
  AdamW optimizer(opt_cfg);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  try {
    for (std::size_t epoch = 1; epoch <= config.train.epochs; ++epoch) {
      const auto start = std::chrono::steady_clock::now();
      Rng shuffle_rng = make_rng(config.seed, Stream::shuffle, epoch);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);

      double loss_sum = 0.0;
      std::size_t correct = 0;
      for (std::size_t b0 = 0; b0 < order.size(); b0 += config.train.batch_size) {
        const std::size_t b1 = std::min(order.size(), b0 + config.train.batch_size);
        std::vector<Matrix> grads = model.params().zeros_like();
        for (std::size_t k = b0; k < b1; ++k) {
          const std::size_t idx = order[k];
          model::DropoutContext drop{mcfg.dropout, config.seed, (epoch << 32) | idx};
          trainer::RolloutOptions ro;
          ro.dropout = mcfg.dropout > 0.0 ? &drop : nullptr;
          const trainer::GradReport rep = trainer::amrb_rollout(model, train_batches[idx], record.schedule, ro);
          const double loss = rep.total_loss();
          if (!std::isfinite(loss)) {
            throw TrainingAbort("non-finite training loss at epoch " + std::to_string(epoch) + ", example " +
                                std::to_string(idx));
          }
          loss_sum += loss;
          if (argmax_row(rep.final_logits) == train_set[idx].label) ++correct;
          for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += rep.grads[p];
        }
        const double inv = 1.0 / static_cast<double>(b1 - b0);
        for (auto& g : grads) g *= inv;
        optimizer.step(model.params().values(), grads);
      }

      const EvalResult val = evaluate(model, val_set, record.schedule);
      EpochMetrics em;
      em.epoch = epoch;
      em.train_loss = loss_sum / static_cast<double>(order.size());
      em.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
      em.val_loss = val.loss;
      em.val_acc = val.accuracy;
      em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record.epochs.push_back(em);
      if (options.log) {
        *options.log << "epoch " << epoch << " train_loss " << em.train_loss << " train_acc " << em.train_acc
                     << " val_loss " << em.val_loss << " val_acc " << em.val_acc << "\n";
      }
    }
  } catch (const Error& e) {
    const bool numerical = dynamic_cast<const TrainingAbort*>(&e) || dynamic_cast<const NumericalOverflow*>(&e) ||
                           dynamic_cast<const DomainError*>(&e);
    if (!numerical) throw;
    record.status = "aborted";
    record.abort_reason = e.what();
    persist(record, options.out_dir);
    throw;
  }

  persist(record, options.out_dir);
  if (!options.out_dir.empty()) save_checkpoint(options.out_dir / "model.ckpt", model);
  result.model.emplace(std::move(model));
  return result;
}

namespace {

// Best-of-`reps` mean seconds per call. Each sample repeats `call` until it
// spans at least kMinSampleSeconds, which keeps timer and scheduler noise
// small next to millisecond-scale calls.
template <typename F>
double best_per_call(F&& call, std::size_t reps) {
  constexpr double kMinSampleSeconds = 0.02;
  using clock = std::chrono::steady_clock;
  auto sample = [&](std::size_t batch) {
    const auto start = clock::now();
    for (std::size_t i = 0; i < batch; ++i) call();
    return std::chrono::duration<double>(clock::now() - start).count();
  };
  std::size_t batch = 1;
  while (sample(batch) < kMinSampleSeconds && batch < (std::size_t{1} << 20)) batch *= 2;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(reps, 1); ++r) {
    best = std::min(best, sample(batch) / static_cast<double>(batch));
  }
  return best;
}

}  // namespace

double time_astro_attention(std::size_t n, std::size_t d, std::size_t m, std::size_t reps, std::uint64_t seed) {
  attention::AttentionConfig cfg;
  cfg.d = d;
  cfg.m = m;
  cfg.n_max = n;
  Rng rng = make_rng(seed, Stream::init);
  const attention::AttentionParams params = attention::AttentionParams::init(cfg, rng);
  const Matrix x = normal_matrix(rng, n, d, 1.0);
  Matrix positional;
  {
    Tape tape(false);
    const auto vars = attention::bind(tape, params, false);
    positional = attention::positional_matrix(n, vars, cfg).value();
  }
  bool finite = true;
  const double seconds = best_per_call(
      [&] {
        // R is supplied, so the positional projections are not bound.
        Tape tape(false);
        attention::AttentionVars vars;
        vars.w_k = tape.constant(params.w_k);
        vars.w_q = tape.constant(params.w_q);
        vars.w_v = tape.constant(params.w_v);
        const Var out = attention::astro_attention(tape.constant(x), vars, cfg, {}, nullptr, tape.constant(positional));
        finite = finite && out.value().all_finite();
      },
      reps);
  if (!finite) throw NumericalOverflow("attention", "non-finite output");
  return seconds;
}

double time_softmax_reference(std::size_t n, std::size_t d, std::size_t m, std::size_t reps, std::uint64_t seed) {
  attention::AttentionConfig cfg;
  cfg.d = d;
  cfg.m = m;
  cfg.n_max = 1;
  Rng rng = make_rng(seed, Stream::init);
  const attention::AttentionParams params = attention::AttentionParams::init(cfg, rng);
  const Matrix x = normal_matrix(rng, n, d, 1.0);
  bool finite = true;
  const double seconds = best_per_call(
      [&] {
        const Matrix out = attention::softmax_attention_reference(x, params);
        finite = finite && out.all_finite();
      },
      reps);
  if (!finite) throw NumericalOverflow("softmax", "non-finite output");
  return seconds;
}

std::vector<BenchRow> bench(const RunConfig& config, const BenchOptions& options) {
  config.validate();
  std::vector<BenchRow> rows;
  const auto& mc = config.model;
  for (std::size_t n : options.attention_sizes) {
    rows.push_back({"astro_attention", n, time_astro_attention(n, mc.d, mc.m, options.reps, config.seed), 0});
    rows.push_back({"softmax_reference", n, time_softmax_reference(n, mc.d, mc.m, options.reps, config.seed), 0});
  }
  for (std::size_t T : options.rollout_segments) {
    model::ModelConfig cfg = config.resolved_model();
    cfg.n_segments = T;
    const model::RmaatModel model(cfg, config.seed);
    const RetentionSchedule schedule = uniform_schedule(static_cast<long long>(T));
    Rng rng = make_rng(config.seed, Stream::data, 0xbe, T);
    std::vector<int> seq(cfg.seg_len * T);
    for (int& id : seq) id = 1 + static_cast<int>(uniform_index(rng, cfg.vocab_size - 1));
    model::SegmentBatch batch = model::split_segments(seq, cfg.seg_len, T);
    batch.final_label = 0;
    for (const bool amrb : {true, false}) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t peak = 0;
      for (std::size_t r = 0; r < std::max<std::size_t>(options.reps, 1); ++r) {
        const auto start = std::chrono::steady_clock::now();
        const auto rep = amrb ? trainer::amrb_rollout(model, batch, schedule) : trainer::bptt_rollout(model, batch, schedule);
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        peak = rep.memory.backward_peak;
      }
      rows.push_back({amrb ? "amrb" : "bptt", T, best, peak});
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out.precision(9);
  out << "kind,size,seconds,backward_peak_floats\n";
  for (const auto& r : rows) out << r.kind << ',' << r.size << ',' << r.seconds << ',' << r.backward_peak_floats << '\n';
  return out.str();
}

}  // namespace astroseq::harness
