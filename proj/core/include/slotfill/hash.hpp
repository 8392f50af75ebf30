// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace slotfill {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// 64-bit FNV-1a, chainable through `state`.
inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t state = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    state ^= p[i];
    state *= kFnvPrime;
  }
  return state;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t state = kFnvOffset) {
  return fnv1a_bytes(s.data(), s.size(), state);
}

}  // namespace slotfill
