// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// The joint model: encoder, boundary head, typing head and projection head.

#pragma once

#include <cstdint>
#include <vector>

#include "slotfill/boundary.hpp"
#include "slotfill/contrastive.hpp"
#include "slotfill/encoder.hpp"
#include "slotfill/typing.hpp"

namespace slotfill {

struct ModelConfig {
  EncoderConfig encoder;
  BoundaryConfig boundary;
  TypingConfig typing;
  ContrastiveConfig contrastive;
};

class SlotModel {
 public:
  /// Fresh parameters drawn from `seed`.
  SlotModel(ModelConfig cfg, std::size_t vocab_size, std::uint64_t seed);

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  ModelConfig cfg_;
  std::size_t vocab_size_;
  ParameterStore params_;
};

struct ForwardOptions {
  bool training = false;
  bool with_projection = false;
  bool keep_attention = false;
};

struct ForwardPass {
  EncoderOutput enc;
  BoundaryOutput bdy;
  /// Boundary-enhanced token vectors, packed [N x d].
  Var u;
  /// Adapted label vectors, [B*K x d].
  Var v;
  /// Projected token vectors, packed [N x p]; only with_projection.
  Var s;
  std::vector<std::size_t> offsets;
};

ForwardPass forward(Tape& tape, SlotModel& model, const Batch& batch, Rng& rng, const ForwardOptions& opts = {});

/// Decoded spans per batch item; labels index the batch's label prefix.
std::vector<std::vector<SlotSpan>> decode(SlotModel& model, const Batch& batch);
/// Decoding from an existing forward pass.
std::vector<std::vector<SlotSpan>> decode(const SlotModel& model, const Batch& batch, const ForwardPass& fp);

}  // namespace slotfill
