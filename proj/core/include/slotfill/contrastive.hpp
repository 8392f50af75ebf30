// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Slot-level supervised contrastive objective over in-batch token pairs.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slotfill/autodiff.hpp"

namespace slotfill {

enum class Metric : std::uint8_t { kCosine, kMse, kSmoothL1, kKl };
std::string to_string(Metric m);
Metric parse_metric(std::string_view s);

struct ContrastiveConfig {
  bool enabled = true;
  Metric metric = Metric::kCosine;
  double tau = 0.5;
  std::size_t projection_dim = 64;
  /// Average one loss per anchor instead of normalizing over the whole pair set.
  bool per_anchor = false;

  /// Throws PreconditionError when tau <= 0.
  void validate() const;
};

void init_contrastive_params(ParameterStore& store, std::size_t d_model, const ContrastiveConfig& cfg, Rng& rng);

/// s = ReLU(linear(r)).
Var project(Tape& tape, ParameterStore& params, Var r);

/// Ordered pairs (i, j), i != j, over slot tokens with types `types`.
struct SlotPairSet {
  std::size_t num_tokens = 0;
  std::vector<std::pair<std::size_t, std::size_t>> positives;
  std::vector<std::pair<std::size_t, std::size_t>> negatives;

  bool empty() const { return positives.empty() && negatives.empty(); }
};

/// Pairs over every ordered pair of distinct slot tokens. Positives share a
/// type. Fewer than two tokens give an empty set.
SlotPairSet collect_slot_pairs(const std::vector<int>& types);

/// Similarity where larger means closer for every metric:
/// cosine; -mean squared difference; -mean Huber(1) difference; -symmetric KL
/// between softmax(a) and softmax(b).
double metric_distance(std::span<const double> a, std::span<const double> b, Metric metric);

/// All-pairs similarity matrix [M x M] of the rows of s.
Var pairwise_similarity(Var s, Metric metric);

/// -log[ sum_{P+} exp(d/tau) / sum_{P+ and P-} exp(d/tau) ] over the whole
/// pair set, or the mean of that quantity per anchor with `per_anchor`.
/// Averaging the numerator over P+ instead only adds the constant log|P+|.
/// Returns constant zero when there are no positives.
Var contrastive_loss(Var similarity, const SlotPairSet& pairs, const ContrastiveConfig& cfg);

}  // namespace slotfill
