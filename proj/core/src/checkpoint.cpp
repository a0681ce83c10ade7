// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "astroseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "astroseq/errors.hpp"

namespace astroseq {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'S', 'T', 'R', 'O', 'S', 'E', 'Q'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated checkpoint: " + path.string());
  return v;
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
  const auto n = get<std::uint64_t>(in, path);
  if (n > (1u << 24)) throw Error("corrupt checkpoint string length: " + path.string());
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw Error("truncated checkpoint: " + path.string());
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const model::RmaatModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg = model.config().to_json();
  put<std::uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  const auto& params = model.params();
  put<std::uint64_t>(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, params[i].rows());
    put<std::uint64_t>(out, params[i].cols());
    const auto data = params[i].data();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  }
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

model::RmaatModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw Error("not an astroseq checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  const model::ModelConfig cfg = model::ModelConfig::from_json(get_string(in, path));
  const auto count = get<std::uint64_t>(in, path);
  model::ParameterSet params;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(in, path);
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (rows * cols > (1ull << 28)) throw Error("corrupt checkpoint tensor size: " + path.string());
    Matrix m(rows, cols);
    auto data = m.data();
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()))) {
      throw Error("truncated checkpoint: " + path.string());
    }
    params.add(std::move(name), std::move(m));
  }
  return model::RmaatModel(cfg, std::move(params));
}

}  // namespace astroseq
