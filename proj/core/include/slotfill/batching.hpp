// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Assembly of [start; label prefix; utterance] inputs and padded batches.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "slotfill/dataset.hpp"
#include "slotfill/vocab.hpp"

namespace slotfill {

/// Half-open index range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

/// How position ids are assigned.
///   span:       each label span and the utterance count from 0; the start
///               marker is position 0.
///   continuous: one index space over the whole sequence.
enum class PositionMode : std::uint8_t { kSpan, kContinuous };

struct InputOptions {
  std::size_t max_seq_len = 128;
  PositionMode positions = PositionMode::kSpan;
};

struct ModelInput {
  std::vector<int> ids;
  std::vector<int> positions;
  /// 0 for the start marker and label prefix, 1 for the utterance.
  std::vector<int> segments;
  std::vector<Span> label_spans;
  Span utterance;
  /// Boundary targets aligned to the utterance.
  std::vector<Bio> y_bd;
  /// Gold type as an index into the prefix label list; -1 for O tokens and
  /// for gold labels absent from the prefix.
  std::vector<int> y_type;

  std::size_t length() const { return ids.size(); }
  std::size_t prefix_length() const { return utterance.begin; }
};

/// Builds the input for `utt` with the labels `prefix` (indices into
/// `labels`) placed in front of it. Throws PreconditionError for an empty
/// prefix, an empty utterance or a sequence longer than max_seq_len.
ModelInput build_model_input(const AnnotatedUtterance& utt, const LabelVocabulary& labels,
                             std::span<const std::size_t> prefix, const Vocabulary& vocab,
                             const InputOptions& opts = {});
/// Same, with every label of `labels` in the prefix.
ModelInput build_model_input(const AnnotatedUtterance& utt, const LabelVocabulary& labels, const Vocabulary& vocab,
                             const InputOptions& opts = {});

/// Right-padded batch of inputs that share one label prefix. Row-major over
/// (item, position) for the per-token arrays.
struct Batch {
  std::size_t size = 0;
  std::size_t seq_len = 0;
  std::size_t prefix_len = 0;
  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<int> segments;
  /// 1 for real tokens, 0 for padding.
  std::vector<std::uint8_t> valid;
  std::vector<Span> label_spans;
  std::vector<std::size_t> utt_len;
  std::vector<std::vector<Bio>> y_bd;
  std::vector<std::vector<int>> y_type;
  /// Position of each item in the input list the batch was cut from.
  std::vector<std::size_t> example_index;

  std::size_t max_utt_len() const;
  /// Start of each item's tokens in the packed utterance order (all tokens of
  /// item 0, then item 1, ...); size()+1 entries.
  std::vector<std::size_t> token_offsets() const;
  std::size_t num_tokens() const;
  std::size_t num_labels() const { return label_spans.size(); }
};

Batch collate(std::span<const ModelInput> inputs, std::span<const std::size_t> order);

/// Consecutive batches of `batch_size` (the last may be smaller). With a seed
/// the order is a seeded shuffle; without one it is the input order.
std::vector<Batch> make_batches(std::span<const ModelInput> inputs, std::size_t batch_size,
                                std::optional<std::uint64_t> seed);

/// Batches of inputs with similar lengths (stable sort by length) to limit
/// padding at inference time. Batch::example_index maps items back.
std::vector<Batch> make_length_batches(std::span<const ModelInput> inputs, std::size_t batch_size);

}  // namespace slotfill
