// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// BiLSTM emissions and a linear-chain CRF over the tags B, I, O.

#pragma once

#include <vector>

#include "slotfill/autodiff.hpp"
#include "slotfill/dataset.hpp"

namespace slotfill {

struct BoundaryConfig {
  /// Hidden size per direction.
  std::size_t hidden = 64;
};

void init_boundary_params(ParameterStore& store, std::size_t input_dim, const BoundaryConfig& cfg, Rng& rng);

struct BoundaryOutput {
  /// Packed per-token (forward | backward) states, [N x 2h].
  Var h_utter;
  /// Packed per-token emissions in B, I, O order, [N x 3].
  Var emissions;
};

/// Runs both LSTM directions over packed utterances (lengths[b] rows each,
/// concatenated) and projects to emissions. Throws NumericError on
/// non-finite output.
BoundaryOutput boundary_forward(Tape& tape, ParameterStore& params, const BoundaryConfig& cfg, Var r_utter,
                                const std::vector<std::size_t>& lengths);
/// Single utterance.
BoundaryOutput boundary_forward(Tape& tape, ParameterStore& params, const BoundaryConfig& cfg, Var r_utter);

/// score(y) = start[y_0] + e_0[y_0] + sum_{i>0} (T[y_{i-1}, y_i] + e_i[y_i]).
/// `e` is n x 3, `transitions` 3 x 3, `start` 1 x 3.
double crf_path_score(const Tensor& e, const Tensor& transitions, const Tensor& start, const std::vector<Bio>& y);
/// log of the sum of exp(score) over all 3^n paths (forward algorithm).
double crf_log_partition(const Tensor& e, const Tensor& transitions, const Tensor& start);
/// -score(gold) + log partition. Throws PreconditionError for n == 0.
double crf_nll_value(const Tensor& e, const Tensor& transitions, const Tensor& start, const std::vector<Bio>& y);

/// Differentiable negative log-likelihood summed over the packed sequences.
Var crf_nll(Var emissions, Var transitions, Var start, const std::vector<std::vector<Bio>>& gold);
/// Single sequence.
Var crf_nll(Var emissions, Var transitions, Var start, const std::vector<Bio>& gold);

/// Highest-scoring path. Ties go to the lowest tag index, both for the final
/// tag and at every backpointer.
std::vector<Bio> viterbi_decode(const Tensor& e, const Tensor& transitions, const Tensor& start);
/// Decodes rows [offset, offset + n) of packed emissions.
std::vector<Bio> viterbi_decode(const Tensor& packed, std::size_t offset, std::size_t n, const Tensor& transitions,
                                const Tensor& start);

}  // namespace slotfill
