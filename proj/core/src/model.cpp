// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/model.hpp"

namespace slotfill {

SlotModel::SlotModel(ModelConfig cfg, std::size_t vocab_size, std::uint64_t seed)
    : cfg_(std::move(cfg)), vocab_size_(vocab_size) {
  cfg_.encoder.validate();
  cfg_.contrastive.validate();
  if (vocab_size < static_cast<std::size_t>(kNumReserved)) throw PreconditionError("vocabulary too small");
  Rng rng(seed);
  const std::size_t d = cfg_.encoder.d_model;
  init_encoder_params(params_, cfg_.encoder, vocab_size, rng);
  init_boundary_params(params_, d, cfg_.boundary, rng);
  init_typing_params(params_, d, cfg_.typing, rng);
  init_contrastive_params(params_, d, cfg_.contrastive, rng);
}

ForwardPass forward(Tape& tape, SlotModel& model, const Batch& batch, Rng& rng, const ForwardOptions& opts) {
  const ModelConfig& cfg = model.config();
  ForwardPass fp;
  fp.offsets = batch.token_offsets();
  fp.enc = encode(tape, model.params(), cfg.encoder, batch, rng, EncodeOptions{opts.training, opts.keep_attention});
  fp.bdy = boundary_forward(tape, model.params(), cfg.boundary, fp.enc.r_utter, batch.utt_len);
  fp.u = boundary_enhanced_repr(tape, model.params(), fp.enc.r_utter, fp.bdy.emissions);
  fp.v = adapt_labels(tape, model.params(), cfg.typing, fp.enc.label_matrix);
  if (opts.with_projection) fp.s = project(tape, model.params(), fp.enc.r_utter);
  return fp;
}

std::vector<std::vector<SlotSpan>> decode(const SlotModel& model, const Batch& batch, const ForwardPass& fp) {
  const ParameterStore& ps = model.params();
  const Tensor& tr = ps.get("boundary.crf.transitions").value;
  const Tensor& st = ps.get("boundary.crf.start").value;
  const Tensor& e = fp.bdy.emissions.value();
  const Tensor& u = fp.u.value();
  const Tensor& v = fp.v.value();
  const std::size_t K = batch.num_labels();
  const std::size_t d = u.cols();
  std::vector<std::vector<SlotSpan>> out(batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const std::size_t n = batch.utt_len[b];
    const std::size_t off = fp.offsets[b];
    auto path = viterbi_decode(e, off, n, tr, st);
    Tensor ub = Tensor::matrix(n, d);
    std::copy_n(u.raw() + off * d, n * d, ub.raw());
    Tensor vb = Tensor::matrix(K, d);
    std::copy_n(v.raw() + b * K * d, K * d, vb.raw());
    out[b] = assign_span_types(cosine_scores(ub, vb), path, model.config().typing.span_scoring);
  }
  return out;
}

std::vector<std::vector<SlotSpan>> decode(SlotModel& model, const Batch& batch) {
  Tape tape(false);
  Rng rng(0);
  ForwardPass fp = forward(tape, model, batch, rng, ForwardOptions{});
  return decode(model, batch, fp);
}

}  // namespace slotfill
