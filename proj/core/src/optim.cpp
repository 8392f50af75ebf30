// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/optim.hpp"

#include <cmath>

namespace slotfill {

AdamW::AdamW(std::vector<Parameter*> params, double encoder_lr, double head_lr, AdamWConfig cfg)
    : params_(std::move(params)), lr_{encoder_lr, head_lr}, cfg_(cfg) {
  if (encoder_lr < 0.0 || head_lr < 0.0) throw PreconditionError("learning rates must be non-negative");
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.shape(), 0.0);
    v_.emplace_back(p->value.shape(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.trainable) continue;
    if (p.grad.numel() != p.value.numel()) p.zero_grad();
    const double lr = lr_[static_cast<std::size_t>(p.group)];
    const double decay = 1.0 - lr * cfg_.weight_decay;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] = p.value[i] * decay - lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace slotfill
