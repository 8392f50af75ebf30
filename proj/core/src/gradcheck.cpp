// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace slotfill {

namespace {

double evaluate(const Objective& f) {
  Tape tape(false);
  const double v = f(tape).value().item();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const Objective& f, const std::vector<Parameter*>& params, double h) {
  return finite_diff_check(f, f, params, h);
}

GradCheckResult finite_diff_check(const Objective& grad_f, const Objective& f, const std::vector<Parameter*>& params,
                                  double h) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape(true);
    Var loss = grad_f(tape);
    if (!std::isfinite(loss.value().item())) throw NumericError("finite_diff_check: objective is not finite");
    tape.backward(loss);
  }
  GradCheckResult res;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = evaluate(f);
      p->value[i] = orig - h;
      const double fm = evaluate(f);
      p->value[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad[i];
      const double diff = std::abs(analytic - numeric);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = diff == 0.0 ? 0.0 : diff / denom;
      ++res.entries_checked;
      if (rel > res.max_relative_error) {
        res.max_relative_error = rel;
        res.worst_parameter = p->name;
        res.worst_index = i;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace slotfill
