// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/batching.hpp"

#include <algorithm>
#include <numeric>

#include "slotfill/rng.hpp"
#include "slotfill/tensor.hpp"

namespace slotfill {

ModelInput build_model_input(const AnnotatedUtterance& utt, const LabelVocabulary& labels,
                             std::span<const std::size_t> prefix, const Vocabulary& vocab, const InputOptions& opts) {
  if (prefix.empty()) throw PreconditionError("build_model_input: at least one label is required");
  if (utt.tokens.empty()) throw PreconditionError("build_model_input: empty utterance");
  ModelInput in;
  in.ids.push_back(kStartId);
  in.positions.push_back(0);
  in.segments.push_back(0);
  std::vector<int> prefix_pos(labels.size(), -1);
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    const SlotLabel& l = labels.at(prefix[k]);
    prefix_pos[prefix[k]] = static_cast<int>(k);
    Span s{in.ids.size(), in.ids.size() + l.tokens.size()};
    for (std::size_t j = 0; j < l.tokens.size(); ++j) {
      in.ids.push_back(vocab.id(l.tokens[j]));
      in.positions.push_back(static_cast<int>(opts.positions == PositionMode::kSpan ? j : s.begin + j));
      in.segments.push_back(0);
    }
    in.label_spans.push_back(s);
  }
  in.utterance = Span{in.ids.size(), in.ids.size() + utt.tokens.size()};
  for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
    in.ids.push_back(vocab.id(utt.tokens[i]));
    in.positions.push_back(static_cast<int>(opts.positions == PositionMode::kSpan ? i : in.utterance.begin + i));
    in.segments.push_back(1);
  }
  if (in.ids.size() > opts.max_seq_len) {
    throw PreconditionError("input of length " + std::to_string(in.ids.size()) + " exceeds max_seq_len = " +
                            std::to_string(opts.max_seq_len));
  }
  in.y_bd = utt.y_bd;
  if (in.y_bd.size() != utt.tokens.size()) in.y_bd.assign(utt.tokens.size(), Bio::O);
  in.y_type.assign(utt.tokens.size(), -1);
  for (std::size_t i = 0; i < utt.y_sl.size() && i < utt.tokens.size(); ++i) {
    const int g = utt.y_sl[i];
    if (g >= 0 && static_cast<std::size_t>(g) < prefix_pos.size()) in.y_type[i] = prefix_pos[static_cast<std::size_t>(g)];
  }
  return in;
}

ModelInput build_model_input(const AnnotatedUtterance& utt, const LabelVocabulary& labels, const Vocabulary& vocab,
                             const InputOptions& opts) {
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), 0);
  return build_model_input(utt, labels, all, vocab, opts);
}

std::size_t Batch::max_utt_len() const {
  std::size_t m = 0;
  for (auto n : utt_len) m = std::max(m, n);
  return m;
}

std::vector<std::size_t> Batch::token_offsets() const {
  std::vector<std::size_t> off(utt_len.size() + 1, 0);
  for (std::size_t b = 0; b < utt_len.size(); ++b) off[b + 1] = off[b] + utt_len[b];
  return off;
}

std::size_t Batch::num_tokens() const {
  std::size_t n = 0;
  for (auto u : utt_len) n += u;
  return n;
}

Batch collate(std::span<const ModelInput> inputs, std::span<const std::size_t> order) {
  if (order.empty()) throw PreconditionError("collate: empty batch");
  Batch b;
  const ModelInput& first = inputs[order[0]];
  b.size = order.size();
  b.prefix_len = first.prefix_length();
  b.label_spans = first.label_spans;
  for (std::size_t k : order) {
    const ModelInput& in = inputs[k];
    if (in.label_spans != first.label_spans ||
        !std::equal(in.ids.begin(), in.ids.begin() + static_cast<std::ptrdiff_t>(b.prefix_len), first.ids.begin())) {
      throw PreconditionError("collate: items in one batch must share the label prefix");
    }
    b.seq_len = std::max(b.seq_len, in.length());
  }
  const std::size_t S = b.seq_len;
  b.ids.assign(b.size * S, kPadId);
  b.positions.assign(b.size * S, 0);
  b.segments.assign(b.size * S, 1);
  b.valid.assign(b.size * S, 0);
  for (std::size_t r = 0; r < b.size; ++r) {
    const ModelInput& in = inputs[order[r]];
    std::copy(in.ids.begin(), in.ids.end(), b.ids.begin() + static_cast<std::ptrdiff_t>(r * S));
    std::copy(in.positions.begin(), in.positions.end(), b.positions.begin() + static_cast<std::ptrdiff_t>(r * S));
    std::copy(in.segments.begin(), in.segments.end(), b.segments.begin() + static_cast<std::ptrdiff_t>(r * S));
    std::fill_n(b.valid.begin() + static_cast<std::ptrdiff_t>(r * S), in.length(), std::uint8_t{1});
    b.utt_len.push_back(in.utterance.size());
    b.y_bd.push_back(in.y_bd);
    b.y_type.push_back(in.y_type);
    b.example_index.push_back(order[r]);
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const ModelInput> inputs, std::size_t batch_size,
                                std::optional<std::uint64_t> seed) {
  if (batch_size == 0) throw PreconditionError("make_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  if (seed) {
    Rng rng(*seed);
    rng.shuffle(order);
  }
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    out.push_back(collate(inputs, std::span<const std::size_t>(order).subspan(i, n)));
  }
  return out;
}

std::vector<Batch> make_length_batches(std::span<const ModelInput> inputs, std::size_t batch_size) {
  if (batch_size == 0) throw PreconditionError("make_length_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return inputs[a].length() < inputs[b].length(); });
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    out.push_back(collate(inputs, std::span<const std::size_t>(order).subspan(i, n)));
  }
  return out;
}

}  // namespace slotfill
