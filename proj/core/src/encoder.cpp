// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/encoder.hpp"

#include <cmath>

#include "slotfill/init.hpp"

namespace slotfill {

std::string to_string(InteractionPolicy p) {
  switch (p) {
    case InteractionPolicy::kFull: return "full";
    case InteractionPolicy::kNoLabelToUtterance: return "no-label-to-utterance";
    case InteractionPolicy::kNoUtteranceToLabel: return "no-utterance-to-label";
    case InteractionPolicy::kNoBidirectional: return "no-bidirectional";
    case InteractionPolicy::kNoLabelToLabel: return "no-label-to-label";
  }
  return "?";
}

std::string to_string(LabelMode m) { return m == LabelMode::kContextAware ? "context-aware" : "decoupled"; }
std::string to_string(PositionMode m) { return m == PositionMode::kSpan ? "span" : "continuous"; }

InteractionPolicy parse_interaction_policy(std::string_view s) {
  for (auto p : {InteractionPolicy::kFull, InteractionPolicy::kNoLabelToUtterance, InteractionPolicy::kNoUtteranceToLabel,
                 InteractionPolicy::kNoBidirectional, InteractionPolicy::kNoLabelToLabel}) {
    if (to_string(p) == s) return p;
  }
  throw PreconditionError("unknown interaction policy '" + std::string(s) +
                          "' (full, no-label-to-utterance, no-utterance-to-label, no-bidirectional, no-label-to-label)");
}

LabelMode parse_label_mode(std::string_view s) {
  if (s == "context-aware") return LabelMode::kContextAware;
  if (s == "decoupled") return LabelMode::kDecoupled;
  throw PreconditionError("unknown label mode '" + std::string(s) + "' (context-aware, decoupled)");
}

PositionMode parse_position_mode(std::string_view s) {
  if (s == "span") return PositionMode::kSpan;
  if (s == "continuous") return PositionMode::kContinuous;
  throw PreconditionError("unknown position mode '" + std::string(s) + "' (span, continuous)");
}

void EncoderConfig::validate() const {
  if (heads == 0 || d_model % heads != 0) {
    throw PreconditionError("encoder.d_model (" + std::to_string(d_model) + ") must be divisible by encoder.heads (" +
                            std::to_string(heads) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw PreconditionError("encoder.dropout must lie in [0, 1)");
  if (!(token_dropout >= 0.0 && token_dropout < 1.0)) throw PreconditionError("encoder.token_dropout must lie in [0, 1)");
  if (max_positions == 0) throw PreconditionError("encoder.max_positions must be positive");
}

namespace {

// Region of each position: 0 start marker, 1 + k label k, -1 utterance, -2 pad.
constexpr int kRegionUtter = -1;
constexpr int kRegionPad = -2;

std::vector<int> regions(std::size_t n, const std::vector<Span>& label_spans, Span utterance) {
  std::vector<int> r(n, kRegionPad);
  if (n == 0) return r;
  r[0] = 0;
  std::size_t prev_end = 1;
  for (std::size_t k = 0; k < label_spans.size(); ++k) {
    const Span& s = label_spans[k];
    if (s.begin < prev_end || s.end < s.begin || s.end > n) {
      throw PreconditionError("attention mask: label ranges overlap or are out of order");
    }
    for (std::size_t i = s.begin; i < s.end; ++i) r[i] = static_cast<int>(k) + 1;
    prev_end = s.end;
  }
  if (utterance.begin < prev_end || utterance.end > n || utterance.end < utterance.begin) {
    throw PreconditionError("attention mask: utterance range overlaps the prefix");
  }
  for (std::size_t i = utterance.begin; i < utterance.end; ++i) r[i] = kRegionUtter;
  return r;
}

void fill_mask(std::uint8_t* out, const std::vector<int>& reg, std::size_t S, InteractionPolicy policy, LabelMode mode) {
  const bool block_l2u = policy == InteractionPolicy::kNoLabelToUtterance || policy == InteractionPolicy::kNoBidirectional;
  const bool block_u2l = policy == InteractionPolicy::kNoUtteranceToLabel || policy == InteractionPolicy::kNoBidirectional;
  const bool block_l2l = policy == InteractionPolicy::kNoLabelToLabel;
  const bool decoupled = mode == LabelMode::kDecoupled;
  for (std::size_t i = 0; i < S; ++i) {
    const int ri = reg[i];
    for (std::size_t j = 0; j < S; ++j) {
      const int rj = reg[j];
      bool ok = rj != kRegionPad;
      if (ok && ri != kRegionPad) {
        const bool row_label = ri > 0, col_label = rj > 0;
        const bool row_utter = ri == kRegionUtter, col_utter = rj == kRegionUtter;
        const bool row_prefix = ri >= 0, col_prefix = rj >= 0;
        if (block_l2u && row_label && col_utter) ok = false;
        // The start marker reads the labels, so utterance rows lose it too.
        if (block_u2l && row_utter && col_prefix) ok = false;
        if (block_l2l && row_label && col_label && ri != rj) ok = false;
        if (decoupled && (row_prefix != col_prefix)) ok = false;
      }
      out[i * S + j] = ok ? 1 : 0;
    }
  }
}

}  // namespace

std::vector<std::uint8_t> build_attention_mask(const ModelInput& input, InteractionPolicy policy, LabelMode mode,
                                               std::size_t padded_len) {
  const std::size_t n = input.length();
  const std::size_t S = std::max(n, padded_len);
  std::vector<int> reg = regions(n, input.label_spans, input.utterance);
  reg.resize(S, kRegionPad);
  std::vector<std::uint8_t> mask(S * S);
  fill_mask(mask.data(), reg, S, policy, mode);
  return mask;
}

std::vector<std::uint8_t> build_batch_attention_mask(const Batch& batch, InteractionPolicy policy, LabelMode mode) {
  const std::size_t S = batch.seq_len;
  std::vector<std::uint8_t> mask(batch.size * S * S);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const Span utt{batch.prefix_len, batch.prefix_len + batch.utt_len[b]};
    std::vector<int> reg = regions(utt.end, batch.label_spans, utt);
    reg.resize(S, kRegionPad);
    fill_mask(mask.data() + b * S * S, reg, S, policy, mode);
  }
  return mask;
}

void init_encoder_params(ParameterStore& store, const EncoderConfig& cfg, std::size_t vocab_size, Rng& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  const auto E = ParamGroup::kEncoder;
  store.add("encoder.tok_emb", normal_tensor(vocab_size, d, 1.0, rng), E);
  store.add("encoder.pos_emb", normal_tensor(cfg.max_positions, d, 1.0, rng), E);
  store.add("encoder.seg_emb", normal_tensor(2, d, 1.0, rng), E);
  const double xavier = std::sqrt(6.0 / static_cast<double>(d + 3 * d));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    store.add(p + "ln1.gamma", Tensor::matrix(1, d, 1.0), E);
    store.add(p + "ln1.beta", Tensor::matrix(1, d, 0.0), E);
    store.add(p + "attn.w_qkv", uniform_tensor(d, 3 * d, xavier, rng), E);
    store.add(p + "attn.b_qkv", Tensor::matrix(1, 3 * d, 0.0), E);
    store.add(p + "attn.w_out", fan_in_uniform(d, d, d, rng), E);
    store.add(p + "attn.b_out", Tensor::matrix(1, d, 0.0), E);
    store.add(p + "ln2.gamma", Tensor::matrix(1, d, 1.0), E);
    store.add(p + "ln2.beta", Tensor::matrix(1, d, 0.0), E);
    store.add(p + "ffn.w1", fan_in_uniform(d, cfg.d_ff, d, rng), E);
    store.add(p + "ffn.b1", fan_in_uniform(1, cfg.d_ff, d, rng), E);
    store.add(p + "ffn.w2", fan_in_uniform(cfg.d_ff, d, cfg.d_ff, rng), E);
    store.add(p + "ffn.b2", fan_in_uniform(1, d, cfg.d_ff, rng), E);
  }
}

std::vector<std::size_t> utterance_rows(const Batch& batch) {
  std::vector<std::size_t> rows;
  rows.reserve(batch.num_tokens());
  for (std::size_t b = 0; b < batch.size; ++b) {
    for (std::size_t i = 0; i < batch.utt_len[b]; ++i) rows.push_back(b * batch.seq_len + batch.prefix_len + i);
  }
  return rows;
}

std::vector<std::vector<std::size_t>> label_pool_groups(const Batch& batch) {
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(batch.size * batch.label_spans.size());
  for (std::size_t b = 0; b < batch.size; ++b) {
    for (const Span& s : batch.label_spans) {
      std::vector<std::size_t> g;
      for (std::size_t i = s.begin; i < s.end; ++i) g.push_back(b * batch.seq_len + i);
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

Var pool_label_embeddings(Var r_label, const std::vector<Span>& label_spans) {
  std::vector<std::vector<std::size_t>> groups;
  for (const Span& s : label_spans) {
    if (s.end <= s.begin) throw PreconditionError("pool_label_embeddings: empty label span");
    if (s.end > r_label.rows()) throw PreconditionError("pool_label_embeddings: span exceeds r_label rows");
    std::vector<std::size_t> g;
    for (std::size_t i = s.begin; i < s.end; ++i) g.push_back(i);
    groups.push_back(std::move(g));
  }
  return ad::mean_rows(r_label, std::move(groups));
}

namespace {

void check_finite(const Var& v, std::size_t layer) {
  if (!v.value().all_finite()) {
    throw NumericError("encoder: non-finite activations in layer " + std::to_string(layer));
  }
}

}  // namespace

EncoderOutput encode(Tape& tape, ParameterStore& params, const EncoderConfig& cfg, const Batch& batch, Rng& rng,
                     const EncodeOptions& opts) {
  cfg.validate();
  const std::size_t B = batch.size, S = batch.seq_len;
  Var tok_emb = tape.param(params.get("encoder.tok_emb"));
  Var pos_emb = tape.param(params.get("encoder.pos_emb"));
  Var seg_emb = tape.param(params.get("encoder.seg_emb"));

  std::vector<std::size_t> ids(batch.ids.begin(), batch.ids.end());
  std::vector<std::size_t> pos(batch.positions.begin(), batch.positions.end());
  std::vector<std::size_t> seg(batch.segments.begin(), batch.segments.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tok_emb.rows()) throw PreconditionError("encode: token id " + std::to_string(ids[i]) + " >= vocabulary size");
    if (pos[i] >= cfg.max_positions) {
      throw PreconditionError("encode: position " + std::to_string(pos[i]) + " exceeds encoder.max_positions = " +
                              std::to_string(cfg.max_positions));
    }
  }
  if (opts.training && cfg.token_dropout > 0.0) {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < batch.utt_len[b]; ++i) {
        const std::size_t r = b * S + batch.prefix_len + i;
        if (rng.bernoulli(cfg.token_dropout)) ids[r] = kUnkId;
      }
    }
  }

  Var x = ad::add(ad::add(ad::gather_rows(tok_emb, std::move(ids)), ad::gather_rows(pos_emb, std::move(pos))),
                  ad::gather_rows(seg_emb, std::move(seg)));
  x = ad::dropout(x, cfg.dropout, rng, opts.training);
  check_finite(x, 0);

  EncoderOutput out;
  const auto mask = build_batch_attention_mask(batch, cfg.interaction, cfg.label_mode);
  const ad::AttentionLayout layout{B, S, cfg.heads};
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l) + ".";
    auto P = [&](const char* name) { return tape.param(params.get(p + name)); };
    Var h = ad::layer_norm(x, P("ln1.gamma"), P("ln1.beta"));
    Var qkv = ad::linear(h, P("attn.w_qkv"), P("attn.b_qkv"));
    Tensor probs;
    Var a = ad::masked_attention(qkv, layout, mask, opts.keep_attention ? &probs : nullptr);
    if (opts.keep_attention) out.attention.push_back(std::move(probs));
    a = ad::linear(a, P("attn.w_out"), P("attn.b_out"));
    x = ad::add(x, ad::dropout(a, cfg.dropout, rng, opts.training));
    h = ad::layer_norm(x, P("ln2.gamma"), P("ln2.beta"));
    Var f = ad::gelu(ad::linear(h, P("ffn.w1"), P("ffn.b1")));
    f = ad::dropout(f, cfg.dropout, rng, opts.training);
    f = ad::linear(f, P("ffn.w2"), P("ffn.b2"));
    x = ad::add(x, ad::dropout(f, cfg.dropout, rng, opts.training));
    check_finite(x, l + 1);
  }
  out.hidden = x;
  out.r_utter = ad::gather_rows(x, utterance_rows(batch));
  Var lm = ad::mean_rows(x, label_pool_groups(batch));
  if (cfg.freeze_label_path) lm = ad::stop_gradient(lm);
  out.label_matrix = lm;
  return out;
}

}  // namespace slotfill
