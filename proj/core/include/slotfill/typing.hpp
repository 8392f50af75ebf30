// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Slot typing by cosine matching between boundary-enhanced token vectors and
// adapted label embeddings.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "slotfill/autodiff.hpp"
#include "slotfill/dataset.hpp"

namespace slotfill {

/// mean: average the per-token scores over the span; first: use the first
/// token only.
enum class SpanScoring : std::uint8_t { kMean, kFirst };
std::string to_string(SpanScoring s);
SpanScoring parse_span_scoring(std::string_view s);

struct TypingConfig {
  std::size_t boundary_dim = 10;
  /// 0 selects d_model / 2.
  std::size_t bottleneck = 0;
  bool adapter_residual = true;
  SpanScoring span_scoring = SpanScoring::kMean;

  std::size_t resolved_bottleneck(std::size_t d_model) const { return bottleneck ? bottleneck : std::max<std::size_t>(1, d_model / 2); }
};

void init_typing_params(ParameterStore& store, std::size_t d_model, const TypingConfig& cfg, Rng& rng);

/// u = fuse([r_utter | softmax(e) E_b]).
Var boundary_enhanced_repr(Tape& tape, ParameterStore& params, Var r_utter, Var emissions);
/// v = up(GELU(down(label_matrix))) (+ label_matrix with the residual on).
Var adapt_labels(Tape& tape, ParameterStore& params, const TypingConfig& cfg, Var label_matrix);

struct TypingLoss {
  /// Cross-entropy with the label side detached: trains the utterance path.
  Var utterance_term;
  /// Cross-entropy with the token side detached: trains the label path.
  Var label_term;
  Var total;
  std::size_t tokens = 0;
};

/// Sums both cross-entropy terms over the rows of `u` selected by `rows`.
/// Row r matches against v rows [groups[r] * K, groups[r] * K + K) with gold
/// column groups[r] * K + targets[r]. Cosine logits, no temperature. With no
/// rows the terms are constant zero.
TypingLoss typing_loss(Tape& tape, Var u, Var v, std::size_t num_labels, const std::vector<std::size_t>& rows,
                       const std::vector<std::size_t>& groups, const std::vector<std::size_t>& targets);

/// Single utterance: y_sl gives the gold label (index into v) for every
/// token whose y_bd is not O.
TypingLoss typing_loss(Tape& tape, Var u, Var v, const std::vector<int>& y_sl, const std::vector<Bio>& y_bd);

/// A typed span, inclusive bounds.
struct SlotSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  int label = -1;
  bool operator==(const SlotSpan&) const = default;
};

/// Maximal B I* runs of a tag path; a leading I opens a span.
std::vector<SlotSpan> extract_spans(const std::vector<Bio>& path);
/// Gold spans: runs split where the label changes as well.
std::vector<SlotSpan> gold_spans(const std::vector<Bio>& y_bd, const std::vector<int>& labels);

/// Cosine score matrix [n x K] between token vectors and label vectors.
Tensor cosine_scores(const Tensor& u, const Tensor& v);

/// Types each span of `path` by the arg-max of its (mean or first-token)
/// score row; ties go to the lowest label index. Throws PreconditionError if
/// there are no labels.
std::vector<SlotSpan> assign_span_types(const Tensor& scores, const std::vector<Bio>& path,
                                        SpanScoring mode = SpanScoring::kMean);

}  // namespace slotfill
