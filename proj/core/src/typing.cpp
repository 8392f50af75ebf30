// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/typing.hpp"

#include <algorithm>
#include <array>

#include "slotfill/init.hpp"

namespace slotfill {

std::string to_string(SpanScoring s) { return s == SpanScoring::kMean ? "mean" : "first"; }

SpanScoring parse_span_scoring(std::string_view s) {
  if (s == "mean") return SpanScoring::kMean;
  if (s == "first") return SpanScoring::kFirst;
  throw PreconditionError("unknown span scoring '" + std::string(s) + "' (mean, first)");
}

void init_typing_params(ParameterStore& store, std::size_t d_model, const TypingConfig& cfg, Rng& rng) {
  const auto H = ParamGroup::kHead;
  const std::size_t db = cfg.boundary_dim;
  const std::size_t bn = cfg.resolved_bottleneck(d_model);
  if (db == 0) throw PreconditionError("typing.boundary_dim must be positive");
  store.add("typing.boundary_emb", normal_tensor(kNumBio, db, 0.1, rng), H);
  store.add("typing.fuse.w", fan_in_uniform(d_model + db, d_model, d_model + db, rng), H);
  store.add("typing.fuse.b", fan_in_uniform(1, d_model, d_model + db, rng), H);
  store.add("typing.adapter.down.w", fan_in_uniform(d_model, bn, d_model, rng), H);
  store.add("typing.adapter.down.b", fan_in_uniform(1, bn, d_model, rng), H);
  store.add("typing.adapter.up.w", fan_in_uniform(bn, d_model, bn, rng), H);
  store.add("typing.adapter.up.b", fan_in_uniform(1, d_model, bn, rng), H);
}

Var boundary_enhanced_repr(Tape& tape, ParameterStore& params, Var r_utter, Var emissions) {
  if (r_utter.rows() != emissions.rows()) throw PreconditionError("boundary_enhanced_repr: row counts differ");
  Var r_bound = ad::matmul(ad::softmax_rows(emissions), tape.param(params.get("typing.boundary_emb")));
  const std::array<Var, 2> parts{r_utter, r_bound};
  return ad::linear(ad::concat_cols(parts), tape.param(params.get("typing.fuse.w")), tape.param(params.get("typing.fuse.b")));
}

Var adapt_labels(Tape& tape, ParameterStore& params, const TypingConfig& cfg, Var label_matrix) {
  if (label_matrix.rows() == 0) throw PreconditionError("adapt_labels: empty label matrix");
  Var h = ad::gelu(ad::linear(label_matrix, tape.param(params.get("typing.adapter.down.w")),
                              tape.param(params.get("typing.adapter.down.b"))));
  Var v = ad::linear(h, tape.param(params.get("typing.adapter.up.w")), tape.param(params.get("typing.adapter.up.b")));
  return cfg.adapter_residual ? ad::add(v, label_matrix) : v;
}

TypingLoss typing_loss(Tape& tape, Var u, Var v, std::size_t num_labels, const std::vector<std::size_t>& rows,
                       const std::vector<std::size_t>& groups, const std::vector<std::size_t>& targets) {
  TypingLoss out;
  out.tokens = rows.size();
  if (rows.empty()) {
    out.utterance_term = tape.constant(Tensor::scalar(0.0));
    out.label_term = tape.constant(Tensor::scalar(0.0));
    out.total = tape.constant(Tensor::scalar(0.0));
    return out;
  }
  if (groups.size() != rows.size() || targets.size() != rows.size()) {
    throw PreconditionError("typing_loss: rows, groups and targets must align");
  }
  std::vector<std::size_t> cols, begin, end;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (targets[r] >= num_labels || (groups[r] + 1) * num_labels > v.rows()) {
      throw PreconditionError("typing_loss: target outside the label matrix");
    }
    begin.push_back(groups[r] * num_labels);
    end.push_back(groups[r] * num_labels + num_labels);
    cols.push_back(groups[r] * num_labels + targets[r]);
  }
  Var un = ad::l2_normalize_rows(ad::gather_rows(u, rows));
  Var vn = ad::l2_normalize_rows(v);
  out.utterance_term = ad::cross_entropy_rows(ad::matmul_nt(un, ad::stop_gradient(vn)), cols, begin, end);
  out.label_term = ad::cross_entropy_rows(ad::matmul_nt(ad::stop_gradient(un), vn), cols, begin, end);
  out.total = ad::add(out.utterance_term, out.label_term);
  return out;
}

TypingLoss typing_loss(Tape& tape, Var u, Var v, const std::vector<int>& y_sl, const std::vector<Bio>& y_bd) {
  if (y_sl.size() != y_bd.size() || y_sl.size() != u.rows()) throw PreconditionError("typing_loss: length mismatch");
  std::vector<std::size_t> rows, groups, targets;
  for (std::size_t i = 0; i < y_bd.size(); ++i) {
    if (y_bd[i] == Bio::O) continue;
    if (y_sl[i] < 0) throw PreconditionError("typing_loss: slot token without a label");
    rows.push_back(i);
    groups.push_back(0);
    targets.push_back(static_cast<std::size_t>(y_sl[i]));
  }
  return typing_loss(tape, u, v, v.rows(), rows, groups, targets);
}

std::vector<SlotSpan> extract_spans(const std::vector<Bio>& path) {
  std::vector<SlotSpan> out;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == Bio::O) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < path.size() && path[j + 1] == Bio::I) ++j;
    out.push_back({i, j, -1});
    i = j + 1;
  }
  return out;
}

std::vector<SlotSpan> gold_spans(const std::vector<Bio>& y_bd, const std::vector<int>& labels) {
  std::vector<SlotSpan> out;
  std::size_t i = 0;
  while (i < y_bd.size()) {
    if (y_bd[i] == Bio::O) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < y_bd.size() && y_bd[j + 1] == Bio::I && labels[j + 1] == labels[i]) ++j;
    out.push_back({i, j, labels[i]});
    i = j + 1;
  }
  return out;
}

Tensor cosine_scores(const Tensor& u, const Tensor& v) {
  if (u.cols() != v.cols()) throw PreconditionError("cosine_scores: widths differ");
  Tensor s = Tensor::matrix(u.rows(), v.rows());
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t k = 0; k < v.rows(); ++k) s(i, k) = cosine_similarity(u.row_span(i), v.row_span(k));
  return s;
}

std::vector<SlotSpan> assign_span_types(const Tensor& scores, const std::vector<Bio>& path, SpanScoring mode) {
  const std::size_t K = scores.cols();
  if (scores.rows() != path.size() && !path.empty()) throw PreconditionError("assign_span_types: score rows differ from path length");
  auto spans = extract_spans(path);
  if (spans.empty()) return spans;
  if (K == 0) throw PreconditionError("assign_span_types: empty label set");
  std::vector<double> avg(K);
  for (auto& sp : spans) {
    const std::size_t last = mode == SpanScoring::kFirst ? sp.start : sp.end;
    std::fill(avg.begin(), avg.end(), 0.0);
    for (std::size_t i = sp.start; i <= last; ++i)
      for (std::size_t k = 0; k < K; ++k) avg[k] += scores(i, k);
    const double inv = 1.0 / static_cast<double>(last - sp.start + 1);
    std::size_t best = 0;
    for (std::size_t k = 0; k < K; ++k) {
      avg[k] *= inv;
      if (avg[k] > avg[best]) best = k;
    }
    sp.label = static_cast<int>(best);
  }
  return spans;
}

}  // namespace slotfill
