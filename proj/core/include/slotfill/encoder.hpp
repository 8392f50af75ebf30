// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pre-norm transformer encoder over [start; label prefix; utterance] inputs.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "slotfill/autodiff.hpp"
#include "slotfill/batching.hpp"

namespace slotfill {

enum class InteractionPolicy : std::uint8_t {
  kFull,
  kNoLabelToUtterance,
  kNoUtteranceToLabel,
  kNoBidirectional,
  kNoLabelToLabel,
};

/// context-aware: labels and utterance share one attention pass.
/// decoupled: the prefix and the utterance cannot see each other.
enum class LabelMode : std::uint8_t { kContextAware, kDecoupled };

std::string to_string(InteractionPolicy p);
std::string to_string(LabelMode m);
std::string to_string(PositionMode m);
InteractionPolicy parse_interaction_policy(std::string_view s);
LabelMode parse_label_mode(std::string_view s);
PositionMode parse_position_mode(std::string_view s);

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  double dropout = 0.1;
  std::size_t max_positions = 128;
  InteractionPolicy interaction = InteractionPolicy::kFull;
  LabelMode label_mode = LabelMode::kContextAware;
  PositionMode positions = PositionMode::kSpan;
  /// Probability of replacing an utterance token by <unk> during training.
  double token_dropout = 0.15;
  /// Stop gradients from flowing into the encoder through the label matrix.
  bool freeze_label_path = false;

  /// Throws PreconditionError when d_model % heads != 0 or dropout is out of
  /// [0, 1).
  void validate() const;
};

/// Attention permissions for one input of length n (row-major n x n,
/// 1 = row may attend column). `padded_len` >= n pads with blocked columns.
std::vector<std::uint8_t> build_attention_mask(const ModelInput& input, InteractionPolicy policy,
                                               LabelMode mode = LabelMode::kContextAware, std::size_t padded_len = 0);
/// Per-item masks for a batch, B * S * S entries.
std::vector<std::uint8_t> build_batch_attention_mask(const Batch& batch, InteractionPolicy policy, LabelMode mode);

void init_encoder_params(ParameterStore& store, const EncoderConfig& cfg, std::size_t vocab_size, Rng& rng);

struct EncoderOutput {
  /// All positions, [B*S x d_model].
  Var hidden;
  /// Utterance tokens in packed order, [num_tokens x d_model].
  Var r_utter;
  /// Per item and label, row b*K + k, [B*K x d_model].
  Var label_matrix;
  /// Post-softmax attention weights per layer, [B*H*S x S], when requested.
  std::vector<Tensor> attention;
};

struct EncodeOptions {
  bool training = false;
  bool keep_attention = false;
};

/// Runs the encoder. Throws NumericError naming the layer when activations
/// stop being finite.
EncoderOutput encode(Tape& tape, ParameterStore& params, const EncoderConfig& cfg, const Batch& batch, Rng& rng,
                     const EncodeOptions& opts = {});

/// Row groups that average each label span: group b*K + k covers rows
/// b*S + span_k.
std::vector<std::vector<std::size_t>> label_pool_groups(const Batch& batch);
/// Mean of r_label rows per label span; row k of the result pools span k.
Var pool_label_embeddings(Var r_label, const std::vector<Span>& label_spans);

/// Hidden-state rows of the utterance tokens in packed order.
std::vector<std::size_t> utterance_rows(const Batch& batch);

}  // namespace slotfill
