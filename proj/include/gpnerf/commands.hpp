// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Batch entry points shared by the CLI tool and the tests.
// Exit codes: 0 success, 1 usage, 2 runtime failure, 3 gradcheck failure.
#pragma once

#include <string>
#include <vector>

#include "gpnerf/config.hpp"

namespace gpnerf {

struct UsageError : Error {
  using Error::Error;
};

int cmd_generate(const RunConfig& cfg, bool force);
int cmd_train(RunConfig cfg, const std::string& resume_or_init_checkpoint);
int cmd_render(const RunConfig& cfg, const std::string& checkpoint,
               const std::string& dataset_dir, int scene,
               const std::vector<int>& view_ids, const std::string& out_dir);
int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& dataset_dir, const std::string& report_path);
int cmd_gradcheck();

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitGradcheck = 3;

}  // namespace gpnerf
