// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slotfill/autodiff.hpp"

namespace slotfill {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Builds the scalar objective on the given tape from the current parameter
/// values. Must be deterministic (no dropout).
using Objective = std::function<Var(Tape&)>;

/// Compares analytic gradients with central differences
/// (f(p+h) - f(p-h)) / 2h for every entry of every listed parameter.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8), with 0/0 counted as 0.
/// Throws NumericError if the objective is ever non-finite.
GradCheckResult finite_diff_check(const Objective& f, const std::vector<Parameter*>& params, double h = 1e-5);

/// Analytic gradient from `grad_f`, central differences of `value_f`. For
/// objectives containing stop_gradient, `value_f` is the function whose true
/// derivative the blocked backward pass computes.
GradCheckResult finite_diff_check(const Objective& grad_f, const Objective& value_f,
                                  const std::vector<Parameter*>& params, double h = 1e-5);

}  // namespace slotfill
