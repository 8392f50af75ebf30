// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Joint training: loss assembly, optimizer steps and per-epoch model
// selection on a development slice.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slotfill/batching.hpp"
#include "slotfill/checkpoint.hpp"
#include "slotfill/config.hpp"
#include "slotfill/evaluation.hpp"
#include "slotfill/model.hpp"
#include "slotfill/optim.hpp"

namespace slotfill {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Source/target data with the vocabulary and label prefixes fixed.
struct PreparedData {
  Vocabulary vocab;
  LabelVocabulary labels;
  std::vector<AnnotatedUtterance> train;
  std::vector<AnnotatedUtterance> dev;
  std::vector<AnnotatedUtterance> target;
  std::vector<std::size_t> source_prefix;
  std::vector<std::size_t> target_prefix;
};

/// Reserved tokens, then every source-utterance token and every label word,
/// sorted.
Vocabulary build_vocabulary(const std::vector<AnnotatedUtterance>& source, const LabelVocabulary& labels);

/// Fixes the vocabulary and, when the split has no dev file, holds out
/// `dev_fraction` of the source set by a seeded shuffle. Throws
/// TrainingError for an empty source set.
PreparedData prepare_data(const DomainSplit& split, double dev_fraction, std::uint64_t seed);

/// Checkpoint metadata and fingerprint for a model trained on `data`.
CheckpointMeta make_checkpoint_meta(const Config& cfg, const Vocabulary& vocab, const LabelVocabulary& labels);
std::uint64_t checkpoint_fingerprint(const Config& cfg, const Vocabulary& vocab, const LabelVocabulary& labels);

struct LossTerms {
  Var boundary;
  Var typing;
  Var typing_utterance;
  Var typing_label;
  Var contrastive;
  Var total;
  std::size_t slot_tokens = 0;
};

struct LossOptions {
  bool training = true;
  bool typing = true;
  bool contrastive = true;
};

/// All loss terms from one forward pass. Disabled terms are constant zeros.
LossTerms compute_losses(Tape& tape, SlotModel& model, const Batch& batch, Rng& rng, const LossOptions& opts);

struct StepLosses {
  double boundary = 0.0;
  double typing = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  StepLosses loss;
  SpanCounts dev;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_f1 = -1.0;
};

class Trainer {
 public:
  Trainer(SlotModel& model, const Config& cfg);

  /// Forward, backward and one AdamW update. Throws NumericError naming the
  /// first non-finite term.
  StepLosses train_step(const Batch& batch);

  /// Runs all epochs over `data.train`. After each epoch the dev span F1 is
  /// measured and the best parameters are kept; the model holds them when
  /// fit returns.
  FitResult fit(const PreparedData& data, const std::function<void(const EpochRecord&)>& on_epoch = {});

  AdamW& optimizer() { return opt_; }
  Rng& rng() { return rng_; }

 private:
  SlotModel& model_;
  Config cfg_;
  AdamW opt_;
  Rng rng_;
};

/// `epoch  L_bdy  L_typ  L_ctr  dev-P  dev-R  dev-F1` per line.
std::string format_metrics_line(const EpochRecord& r);
void write_metrics_log(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace slotfill
