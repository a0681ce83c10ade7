// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "astroseq/config.hpp"
#include "astroseq/errors.hpp"
#include "astroseq/harness.hpp"

using namespace astroseq;

namespace {

const char* kTinyRun = R"(seed = 3

[model]
d = 8
m = 6
ffn_dim = 16
n_mem_tokens = 2
seg_len = 4
n_segments = 2

[task]
kind = copy
alphabet_size = 4
length = 8
n_classes = 2

[train]
epochs = 2
train_size = 16
val_size = 8
batch_size = 4
schedule = uniform
)";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parses and round-trips exactly") {
  RunConfig c = parse_config(kTinyRun);
  CHECK(c.seed == 3);
  CHECK(c.model.d == 8);
  CHECK(c.task.length == 8);
  CHECK(c.train.schedule == ScheduleKind::uniform);
  CHECK(c.resolved_model().n_classes == 2);
  CHECK(c.resolved_model().vocab_size == c.task.vocab_size());
  CHECK(c.resolved_task().seed == 3);
  c.model.alpha = 0.1 + 0.2;
  c.retention.params.tau_s = 1.0 / 3.0;
  c.retention.drive.rate_hz = 12.5;
  CHECK(parse_config(emit_config(c)) == c);
}

TEST_CASE("config rejects unknown keys, sections and bad values") {
  CHECK_THROWS_AS(parse_config("[model]\nwidth = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optim]\nlr = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nd = eight\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nschedule = cosine\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[retention]\ntau_s = -1\n"), ConfigError);
  // Task longer than the model's segments can hold.
  CHECK_THROWS_AS(parse_config("[model]\nseg_len = 4\nn_segments = 2\n[task]\nlength = 9\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.toml"), ConfigError);
}

TEST_CASE("training is reproducible and writes its artifacts") {
  const RunConfig c = parse_config(kTinyRun);
  const auto dir = std::filesystem::temp_directory_path() / "astroseq_harness_test";
  std::filesystem::remove_all(dir);
  harness::TrainOptions opt;
  opt.out_dir = dir;
  const auto a = harness::train(c, opt);
  const auto b = harness::train(c);
  CHECK(a.record.to_json(false) == b.record.to_json(false));
  CHECK(a.record.epochs.size() == 2);
  REQUIRE(a.model.has_value());
  CHECK(std::filesystem::exists(dir / "run_record.json"));
  CHECK(std::filesystem::exists(dir / "learning_curve.csv"));
  CHECK(std::filesystem::exists(dir / "model.ckpt"));
  const auto j = nlohmann::json::parse(read_file(dir / "run_record.json"));
  CHECK(j.at("schema").get<int>() == harness::kRunRecordSchema);
  CHECK(j.at("status").get<std::string>() == "ok");
  CHECK(j.at("content_hash").get<std::string>() == a.record.content_hash);
  CHECK(read_file(dir / "learning_curve.csv").rfind("epoch,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("content hash tracks the config text") {
  RunConfig c = parse_config(kTinyRun);
  c.train.epochs = 1;
  const auto a = harness::train(c);
  c.seed = 4;
  const auto b = harness::train(c);
  CHECK(a.record.content_hash.size() == 16);
  CHECK(a.record.content_hash != b.record.content_hash);
}

TEST_CASE("evaluation counts every example") {
  const RunConfig c = parse_config(kTinyRun);
  const model::RmaatModel m(c.resolved_model(), 0);
  const auto data = tasks::generate(c.resolved_task(), 10, tasks::kValidationSplit);
  const auto r = harness::evaluate(m, data, harness::resolve_schedule(c));
  CHECK(r.count == 10);
  CHECK(r.accuracy >= 0.0);
  CHECK(r.accuracy <= 1.0);
}

TEST_CASE("bench rows cover every requested size") {
  const RunConfig c = parse_config(kTinyRun);
  harness::BenchOptions opt;
  opt.attention_sizes = {16, 32};
  opt.rollout_segments = {2};
  opt.reps = 1;
  const auto rows = harness::bench(c, opt);
  CHECK(rows.size() == 6);
  CHECK(harness::bench_csv(rows).rfind("kind,", 0) == 0);
}
