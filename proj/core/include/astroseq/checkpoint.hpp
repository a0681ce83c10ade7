// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "astroseq/model.hpp"

namespace astroseq {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (little-endian): magic "ASTROSEQ", u32 version, u64 JSON
/// length + model config JSON, u64 parameter count, then per parameter:
/// u64 name length + name, u64 rows, u64 cols, rows*cols f64 row-major.
void save_checkpoint(const std::filesystem::path& path, const model::RmaatModel& model);
model::RmaatModel load_checkpoint(const std::filesystem::path& path);

}  // namespace astroseq
