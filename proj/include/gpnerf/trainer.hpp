// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>

#include "gpnerf/model.hpp"

namespace gpnerf {

struct TrainState {
  GpnerfModel model;
  Adam adam;
  int64_t step = 0;
};

TrainState make_train_state(const RunConfig& cfg);

struct StepOutcome {
  LossReport report;
  double lr_extractor = 0, lr_transformer = 0, lr_head = 0;
  int scene = 0, target_view = 0;
};

/// Loss graph of one training step (no optimizer mutation). Exposed so the
/// gradient checker can rebuild the exact same graph around perturbed
/// parameters.
struct ForwardBundle {
  Var l_rgb, l_sem, l_sd, l_dg, l_all;
  LossReport report;
  int scene = 0, target_view = 0;
};

/// frozen_teacher (optional) substitutes for the recomputed teacher map; the
/// finite-difference harness passes the unperturbed teacher so FD and
/// autodiff differentiate the same function (the teacher is constant by
/// contract either way).
ForwardBundle training_forward(const GpnerfModel& model, const Dataset& data,
                               int64_t step_index,
                               const TeacherMap* frozen_teacher = nullptr);

/// One optimization step: pick scene and target view, select the nearest
/// reference views, render a ray batch at stride-4 cells, build the fused
/// map, apply all losses, and step the three parameter groups at their
/// decayed learning rates.
StepOutcome train_step(TrainState& state, const Dataset& data, int64_t step_index);

/// Runs cfg.steps steps with CSV logging and periodic checkpoints.
/// Resumes from state.step.
void train_loop(TrainState& state, const Dataset& data, std::ostream* csv,
                const std::string& checkpoint_path);

/// Training split: every view except the trailing holdout.
std::vector<int> train_view_ids(const SceneDataset& sd, int holdout);
std::vector<int> test_view_ids(const SceneDataset& sd, int holdout);

constexpr int kDepthBandHalfWidth = 2;  // N_p

}  // namespace gpnerf
