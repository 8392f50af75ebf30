// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "slotfill/init.hpp"

namespace slotfill {

std::string to_string(Metric m) {
  switch (m) {
    case Metric::kCosine: return "cosine";
    case Metric::kMse: return "mse";
    case Metric::kSmoothL1: return "smooth-l1";
    case Metric::kKl: return "kl";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  for (auto m : {Metric::kCosine, Metric::kMse, Metric::kSmoothL1, Metric::kKl}) {
    if (to_string(m) == s) return m;
  }
  throw PreconditionError("unknown metric '" + std::string(s) + "' (cosine, mse, smooth-l1, kl)");
}

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw PreconditionError("contrastive.tau must be positive");
  if (projection_dim == 0) throw PreconditionError("contrastive.projection_dim must be positive");
}

void init_contrastive_params(ParameterStore& store, std::size_t d_model, const ContrastiveConfig& cfg, Rng& rng) {
  store.add("contrastive.proj.w", fan_in_uniform(d_model, cfg.projection_dim, d_model, rng), ParamGroup::kHead);
  store.add("contrastive.proj.b", fan_in_uniform(1, cfg.projection_dim, d_model, rng), ParamGroup::kHead);
}

Var project(Tape& tape, ParameterStore& params, Var r) {
  return ad::relu(ad::linear(r, tape.param(params.get("contrastive.proj.w")), tape.param(params.get("contrastive.proj.b"))));
}

SlotPairSet collect_slot_pairs(const std::vector<int>& types) {
  SlotPairSet p;
  p.num_tokens = types.size();
  if (types.size() < 2) return p;
  for (std::size_t i = 0; i < types.size(); ++i) {
    for (std::size_t j = 0; j < types.size(); ++j) {
      if (i == j) continue;
      (types[i] == types[j] ? p.positives : p.negatives).emplace_back(i, j);
    }
  }
  return p;
}

namespace {

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> p(x.size());
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (p[k] = std::exp(x[k] - m));
  for (auto& v : p) v /= s;
  return p;
}

double huber(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double huber_grad(double d) { return std::abs(d) < 1.0 ? d : (d > 0 ? 1.0 : -1.0); }

// Similarity value plus its gradients with respect to a and b.
double similarity_with_grad(std::span<const double> a, std::span<const double> b, Metric metric, double* ga,
                            double* gb) {
  const std::size_t D = a.size();
  const double invD = 1.0 / static_cast<double>(D);
  switch (metric) {
    case Metric::kCosine: {
      const double na = l2_norm(a), nb = l2_norm(b);
      if (na == 0.0 || nb == 0.0) {
        if (ga) std::fill(ga, ga + D, 0.0);
        if (gb) std::fill(gb, gb + D, 0.0);
        return cosine_similarity(a, b);
      }
      const double c = dot(a, b) / (na * nb);
      for (std::size_t k = 0; k < D; ++k) {
        if (ga) ga[k] = b[k] / (na * nb) - c * a[k] / (na * na);
        if (gb) gb[k] = a[k] / (na * nb) - c * b[k] / (nb * nb);
      }
      return c;
    }
    case Metric::kMse: {
      double s = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
        if (ga) ga[k] = -2.0 * d * invD;
        if (gb) gb[k] = 2.0 * d * invD;
      }
      return -s * invD;
    }
    case Metric::kSmoothL1: {
      double s = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        const double d = a[k] - b[k];
        s += huber(d);
        if (ga) ga[k] = -huber_grad(d) * invD;
        if (gb) gb[k] = huber_grad(d) * invD;
      }
      return -s * invD;
    }
    case Metric::kKl: {
      const auto p = softmax(a);
      const auto q = softmax(b);
      double f = 0.0;
      std::vector<double> gp(D), gq(D);
      for (std::size_t k = 0; k < D; ++k) {
        const double lr = std::log(p[k]) - std::log(q[k]);
        f += 0.5 * (p[k] - q[k]) * lr;
        gp[k] = 0.5 * (lr + 1.0 - q[k] / p[k]);
        gq[k] = 0.5 * (-lr + 1.0 - p[k] / q[k]);
      }
      double pg = 0.0, qg = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        pg += p[k] * gp[k];
        qg += q[k] * gq[k];
      }
      for (std::size_t k = 0; k < D; ++k) {
        if (ga) ga[k] = -p[k] * (gp[k] - pg);
        if (gb) gb[k] = -q[k] * (gq[k] - qg);
      }
      return -f;
    }
  }
  return 0.0;
}

}  // namespace

double metric_distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size() || a.empty()) throw PreconditionError("metric_distance: vectors must be non-empty and equal length");
  if (metric == Metric::kCosine) return cosine_similarity(a, b);
  return similarity_with_grad(a, b, metric, nullptr, nullptr);
}

Var pairwise_similarity(Var s, Metric metric) {
  const Tensor& sv = s.value();
  const std::size_t M = sv.rows(), D = sv.cols();
  if (D == 0) throw PreconditionError("pairwise_similarity: zero-width input");
  Tensor out = Tensor::matrix(M, M);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) out(i, j) = metric_distance(sv.row_span(i), sv.row_span(j), metric);
  const int si = s.id();
  return s.tape().record(std::move(out), {si}, [si, metric, M, D](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& sv2 = t.value(si);
    Tensor& gs = t.grad_for(si);
    std::vector<double> ga(D), gb(D);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t j = 0; j < M; ++j) {
        const double w = g(i, j);
        if (w == 0.0) continue;
        similarity_with_grad(sv2.row_span(i), sv2.row_span(j), metric, ga.data(), gb.data());
        for (std::size_t k = 0; k < D; ++k) {
          gs(i, k) += w * ga[k];
          gs(j, k) += w * gb[k];
        }
      }
    }
  });
}

Var contrastive_loss(Var similarity, const SlotPairSet& pairs, const ContrastiveConfig& cfg) {
  cfg.validate();
  Tape& tape = similarity.tape();
  const std::size_t M = pairs.num_tokens;
  if (pairs.positives.empty()) return tape.constant(Tensor::scalar(0.0));
  if (similarity.rows() != M || similarity.cols() != M) throw PreconditionError("contrastive_loss: similarity must be M x M");
  std::vector<std::uint8_t> pos(M * M, 0), all(M * M, 0);
  for (auto [i, j] : pairs.positives) pos[i * M + j] = all[i * M + j] = 1;
  for (auto [i, j] : pairs.negatives) all[i * M + j] = 1;
  Var z = ad::scale(similarity, 1.0 / cfg.tau);
  if (!cfg.per_anchor) {
    return ad::sub(ad::masked_log_sum_exp(z, all), ad::masked_log_sum_exp(z, pos));
  }
  // Per-anchor variant: anchors without positives are skipped.
  std::vector<std::size_t> npos(M, 0);
  for (auto [i, j] : pairs.positives) ++npos[i];
  Tensor weight = Tensor::matrix(M, 1);
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < M; ++i) anchors += npos[i] > 0;
  for (std::size_t i = 0; i < M; ++i) {
    if (npos[i] > 0) weight[i] = 1.0 / static_cast<double>(anchors);
  }
  Var per = ad::sub(ad::masked_log_sum_exp_rows(z, all), ad::masked_log_sum_exp_rows(z, pos));
  return ad::sum(ad::mul_const(per, weight));
}

}  // namespace slotfill
