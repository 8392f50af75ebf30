// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Span-level scoring, zero-shot evaluation with seen/unseen groups, decode
// latency measurement and slot-entity embedding export.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slotfill/batching.hpp"
#include "slotfill/model.hpp"

namespace slotfill {

/// Exact-span, type-sensitive match counts.
struct SpanCounts {
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const;
  double recall() const;
  /// 2PR/(P+R), with 0 when P+R = 0.
  double f1() const;
  SpanCounts& operator+=(const SpanCounts& o);
};

/// A prediction is a hit iff start, end and label equal a distinct gold span.
SpanCounts span_f1(const std::vector<SlotSpan>& pred, const std::vector<SlotSpan>& gold);

/// Gold spans with global label indices.
std::vector<SlotSpan> utterance_gold_spans(const AnnotatedUtterance& utt);

/// Decoded spans for every utterance with `prefix` as the label sequence.
/// Span labels are global label indices.
std::vector<std::vector<SlotSpan>> predict_spans(SlotModel& model, const Vocabulary& vocab,
                                                 const LabelVocabulary& labels, std::span<const std::size_t> prefix,
                                                 const std::vector<AnnotatedUtterance>& data,
                                                 const InputOptions& input, std::size_t batch_size);

SpanCounts score_dataset(SlotModel& model, const Vocabulary& vocab, const LabelVocabulary& labels,
                         std::span<const std::size_t> prefix, const std::vector<AnnotatedUtterance>& data,
                         const InputOptions& input, std::size_t batch_size);

struct LabelReport {
  std::string label;
  bool seen = false;
  SpanCounts counts;
};

struct EvalReport {
  SpanCounts overall;
  /// Spans whose label also occurs in the source domain.
  SpanCounts seen;
  /// Spans whose label never occurs in the source domain.
  SpanCounts unseen;
  /// All spans of utterances that contain at least one unseen gold span.
  SpanCounts unseen_uttr;
  std::vector<LabelReport> per_label;
  std::size_t utterances = 0;
  double decode_seconds = 0.0;
};

/// Decodes `data` with `prefix` and scores it. Gold spans are grouped by
/// their gold label, predictions by their predicted label. Throws
/// PreconditionError for an empty prefix.
EvalReport evaluate_zero_shot(SlotModel& model, const Vocabulary& vocab, const LabelVocabulary& labels,
                              std::span<const std::size_t> prefix, const std::vector<AnnotatedUtterance>& data,
                              const InputOptions& input, std::size_t batch_size);

std::string report_tsv(const EvalReport& r);
std::string report_kv(const EvalReport& r);
/// Writes `<stem>.tsv` and `<stem>.kv`.
void write_report(const std::filesystem::path& stem, const EvalReport& r);

/// Copy of `labels` in which each label of `which` is renamed to
/// `words_per_label` random vocabulary words that occur in no label name.
LabelVocabulary shuffled_label_control(const LabelVocabulary& labels, std::span<const std::size_t> which,
                                       const Vocabulary& vocab, Rng& rng, std::size_t words_per_label = 2);

enum class DecodeMode : std::uint8_t { kBatched, kInstance };

/// Wall-clock seconds to decode every input once (forward, Viterbi and type
/// matching). Batches are assembled before the clock starts.
double benchmark_latency(SlotModel& model, std::span<const ModelInput> inputs, std::size_t batch_size,
                         DecodeMode mode);

struct LatencyResult {
  std::vector<double> batched_runs;
  std::vector<double> instance_runs;
  double batched = 0.0;
  double instance = 0.0;
  double speedup() const { return batched > 0.0 ? instance / batched : 0.0; }
};

/// One warm-up pass per mode, then the median of `runs` timed passes.
LatencyResult compare_latency(SlotModel& model, std::span<const ModelInput> inputs, std::size_t batch_size,
                              std::size_t runs);

/// One row per slot-entity token: utterance id, token index, gold label and
/// the L2-normalized boundary-enhanced vector, tab-separated. Returns the row
/// count.
std::size_t export_entity_embeddings(SlotModel& model, const Vocabulary& vocab, const LabelVocabulary& labels,
                                     std::span<const std::size_t> prefix,
                                     const std::vector<AnnotatedUtterance>& data, const InputOptions& input,
                                     const std::filesystem::path& path);

}  // namespace slotfill
