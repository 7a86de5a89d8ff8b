// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference verification of the whole differentiable stack on a
// micro configuration: per-op jacobian probes, per-parameter-tensor checks
// of the full training loss, and the gradient-block contract.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gpnerf {

struct GradCheckItem {
  std::string name;
  double max_rel_err = 0;
  bool pass = false;
};

struct GradCheckResult {
  std::vector<GradCheckItem> items;
  bool all_pass = false;
  double seconds = 0;
};

/// rel_tol applies against max(|fd|, |ad|) with a small absolute floor.
GradCheckResult run_gradcheck(std::ostream& log, double rel_tol = 1e-3);

}  // namespace gpnerf
