// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "slotfill/autodiff.hpp"

namespace slotfill {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and one learning rate per ParamGroup.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, double encoder_lr, double head_lr, AdamWConfig cfg = {});

  /// One update from the parameters' accumulated gradients.
  void step();
  void zero_grad();
  void set_lr(ParamGroup group, double lr) { lr_[static_cast<std::size_t>(group)] = lr; }
  double lr(ParamGroup group) const { return lr_[static_cast<std::size_t>(group)]; }
  std::size_t steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  std::array<double, 2> lr_;
  AdamWConfig cfg_;
  std::size_t t_ = 0;
};

}  // namespace slotfill
