// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint archive: 8-byte magic, little-endian u64 manifest length, JSON
// manifest (shapes, dtypes, module paths, step counter, config snapshot,
// optimizer metadata), then raw little-endian buffers. Values are stored as
// f8 so a reload reproduces forward passes bit-exactly.
#pragma once

#include <cstdint>
#include <string>

#include "gpnerf/nn.hpp"

namespace gpnerf {

struct CheckpointMeta {
  int64_t step = 0;
  std::string config_dump;
};

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const Adam& adam, int64_t step,
                     const std::string& config_dump);

/// Loads values and optimizer moments into an existing (shape-compatible)
/// ParamStore. Missing or mismatched tensors raise with the tensor name.
CheckpointMeta load_checkpoint(const std::string& path, ParamStore& params,
                               Adam& adam);

/// Reads only the embedded config snapshot.
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace gpnerf
