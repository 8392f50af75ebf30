// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "slotfill/rng.hpp"
#include "slotfill/tensor.hpp"

namespace slotfill {

inline Tensor uniform_tensor(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

inline Tensor normal_tensor(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline Tensor fan_in_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  return uniform_tensor(rows, cols, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace slotfill
