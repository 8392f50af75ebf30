// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/encoder.hpp"

#include <gtest/gtest.h>

#include <cstring>

#include "oracles.hpp"

namespace slotfill {
namespace {

using testing::micro_batch;
using testing::micro_fixture;

// [start, l1, l1, l2, l2, u, u]
ModelInput two_label_input() {
  ModelInput in;
  in.ids = {0, 3, 4, 5, 6, 7, 8};
  in.positions = {0, 0, 1, 0, 1, 0, 1};
  in.segments = {0, 0, 0, 0, 0, 1, 1};
  in.label_spans = {{1, 3}, {3, 5}};
  in.utterance = {5, 7};
  return in;
}

enum Region { kStart, kLabel1, kLabel2, kUtter };
constexpr Region kRegions[] = {kStart, kLabel1, kLabel1, kLabel2, kLabel2, kUtter, kUtter};

TEST(AttentionMask, FullIsAllTrue) {
  ModelInput in;
  in.ids = {0, 3, 4, 5, 6};
  in.label_spans = {{1, 2}};
  in.utterance = {2, 5};
  const auto m = build_attention_mask(in, InteractionPolicy::kFull);
  ASSERT_EQ(m.size(), 25u);
  for (auto v : m) EXPECT_EQ(v, 1);
}

TEST(AttentionMask, NoBidirectionalIsConjunction) {
  const ModelInput in = two_label_input();
  const auto both = build_attention_mask(in, InteractionPolicy::kNoBidirectional);
  const auto l2u = build_attention_mask(in, InteractionPolicy::kNoLabelToUtterance);
  const auto u2l = build_attention_mask(in, InteractionPolicy::kNoUtteranceToLabel);
  for (std::size_t i = 0; i < both.size(); ++i) EXPECT_EQ(both[i], l2u[i] & u2l[i]);
}

TEST(AttentionMask, NoLabelToLabelEnumerated) {
  const auto m = build_attention_mask(two_label_input(), InteractionPolicy::kNoLabelToLabel);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      const bool cross = (kRegions[i] == kLabel1 && kRegions[j] == kLabel2) ||
                         (kRegions[i] == kLabel2 && kRegions[j] == kLabel1);
      EXPECT_EQ(m[i * 7 + j], cross ? 0 : 1) << i << "," << j;
    }
  }
}

TEST(AttentionMask, DirectionalPoliciesEnumerated) {
  const auto l2u = build_attention_mask(two_label_input(), InteractionPolicy::kNoLabelToUtterance);
  const auto u2l = build_attention_mask(two_label_input(), InteractionPolicy::kNoUtteranceToLabel);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      const bool row_label = kRegions[i] == kLabel1 || kRegions[i] == kLabel2;
      EXPECT_EQ(l2u[i * 7 + j], row_label && kRegions[j] == kUtter ? 0 : 1);
      EXPECT_EQ(u2l[i * 7 + j], kRegions[i] == kUtter && kRegions[j] != kUtter ? 0 : 1);
    }
  }
}

TEST(AttentionMask, DecoupledSeparatesPrefixAndUtterance) {
  const auto m = build_attention_mask(two_label_input(), InteractionPolicy::kFull, LabelMode::kDecoupled);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(m[i * 7 + j], (kRegions[i] == kUtter) == (kRegions[j] == kUtter));
}

TEST(AttentionMask, PaddingBlockedAndOverlapRejected) {
  const auto m = build_attention_mask(two_label_input(), InteractionPolicy::kFull, LabelMode::kContextAware, 9);
  ASSERT_EQ(m.size(), 81u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(m[i * 9 + 7], 0);
    EXPECT_EQ(m[i * 9 + 8], 0);
  }
  ModelInput bad = two_label_input();
  bad.label_spans = {{1, 4}, {3, 5}};
  EXPECT_THROW(build_attention_mask(bad, InteractionPolicy::kFull), PreconditionError);
}

TEST(Encode, ZeroLayersIsEmbeddingSum) {
  auto f = micro_fixture();
  f.config.encoder.layers = 0;
  SlotModel model(f.config, f.vocab.size(), 3);
  const Batch batch = micro_batch(f);
  Tape tape(false);
  Rng rng(0);
  const EncoderOutput out = encode(tape, model.params(), f.config.encoder, batch, rng);
  const auto rows = utterance_rows(batch);
  const Tensor& tok = model.params().get("encoder.tok_emb").value;
  const Tensor& pos = model.params().get("encoder.pos_emb").value;
  const Tensor& seg = model.params().get("encoder.seg_emb").value;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t k = rows[r];
    for (std::size_t c = 0; c < f.config.encoder.d_model; ++c) {
      const double want = tok(static_cast<std::size_t>(batch.ids[k]), c) +
                          pos(static_cast<std::size_t>(batch.positions[k]), c) +
                          seg(static_cast<std::size_t>(batch.segments[k]), c);
      EXPECT_EQ(out.r_utter.value()(r, c), want);
    }
  }
}

TEST(Encode, AttentionRowsSumToOneOnRealTokens) {
  auto f = micro_fixture();
  SlotModel model(f.config, f.vocab.size(), 3);
  const Batch batch = micro_batch(f);
  Tape tape(false);
  Rng rng(0);
  const EncoderOutput out = encode(tape, model.params(), f.config.encoder, batch, rng, {false, true});
  ASSERT_EQ(out.attention.size(), 1u);
  const Tensor& p = out.attention[0];
  for (std::size_t b = 0; b < batch.size; ++b) {
    for (std::size_t i = 0; i < batch.seq_len; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < batch.seq_len; ++j) {
        const double w = p(b * batch.seq_len + i, j);
        if (!batch.valid[b * batch.seq_len + j]) {
          EXPECT_EQ(w, 0.0);
        }
        s += w;
      }
      if (batch.valid[b * batch.seq_len + i]) {
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

Tensor utterance_states(SlotModel& model, const testing::MicroFixture& f, const LabelVocabulary& labels) {
  std::vector<ModelInput> in;
  for (const auto& u : f.data) in.push_back(build_model_input(u, labels, f.vocab));
  const Batch batch = collate(in, std::vector<std::size_t>{0, 1});
  Tape tape(false);
  Rng rng(0);
  return encode(tape, model.params(), model.config().encoder, batch, rng).r_utter.value();
}

TEST(Encode, BlockedUtteranceIgnoresPrefixBitExactly) {
  auto f = micro_fixture();
  LabelVocabulary longer;
  longer.add("to_paris", true, false);
  longer.add("five_pm_now", true, false);
  longer.add("city", true, false);
  for (auto policy : {InteractionPolicy::kNoUtteranceToLabel, InteractionPolicy::kFull}) {
    ModelConfig mc = f.config;
    mc.encoder.interaction = policy;
    SlotModel model(mc, f.vocab.size(), 7);
    const Tensor a = utterance_states(model, f, f.labels);
    const Tensor b = utterance_states(model, f, longer);
    ASSERT_EQ(a.shape(), b.shape());
    const bool same = std::memcmp(a.raw(), b.raw(), a.numel() * sizeof(double)) == 0;
    EXPECT_EQ(same, policy == InteractionPolicy::kNoUtteranceToLabel);
  }
}

TEST(Encode, NonFiniteActivationsNameLayer) {
  auto f = micro_fixture();
  SlotModel model(f.config, f.vocab.size(), 3);
  model.params().get("encoder.layer0.ffn.b2").value[0] = std::numeric_limits<double>::infinity();
  Tape tape(false);
  Rng rng(0);
  try {
    encode(tape, model.params(), f.config.encoder, micro_batch(f), rng);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
}

TEST(Encode, InvalidConfigRejected) {
  EncoderConfig cfg;
  cfg.d_model = 10;
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg.heads = 2;
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(PoolLabels, SingleAndTwoTokenSpans) {
  Tape tape(false);
  Var r = tape.constant(Tensor::matrix(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6}));
  Var m = pool_label_embeddings(r, {{0, 1}, {1, 3}});
  EXPECT_EQ(m.value()(0, 0), 1.0);
  EXPECT_EQ(m.value()(0, 1), 2.0);
  EXPECT_EQ(m.value()(1, 0), 4.0);
  EXPECT_EQ(m.value()(1, 1), 5.0);
  EXPECT_THROW(pool_label_embeddings(r, {{1, 1}}), PreconditionError);
}

}  // namespace
}  // namespace slotfill
