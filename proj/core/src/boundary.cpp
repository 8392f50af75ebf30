// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/boundary.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "slotfill/init.hpp"

namespace slotfill {

void init_boundary_params(ParameterStore& store, std::size_t input_dim, const BoundaryConfig& cfg, Rng& rng) {
  const std::size_t h = cfg.hidden;
  if (h == 0) throw PreconditionError("boundary.hidden must be positive");
  const auto H = ParamGroup::kHead;
  for (const char* dir : {"fw", "bw"}) {
    const std::string p = std::string("boundary.lstm.") + dir + ".";
    store.add(p + "w_ih", fan_in_uniform(input_dim, 4 * h, h, rng), H);
    store.add(p + "w_hh", fan_in_uniform(h, 4 * h, h, rng), H);
    store.add(p + "b", fan_in_uniform(1, 4 * h, h, rng), H);
  }
  store.add("boundary.emit.w", fan_in_uniform(2 * h, kNumBio, 2 * h, rng), H);
  store.add("boundary.emit.b", fan_in_uniform(1, kNumBio, 2 * h, rng), H);
  store.add("boundary.crf.transitions", normal_tensor(kNumBio, kNumBio, 0.1, rng), H);
  store.add("boundary.crf.start", Tensor::matrix(1, kNumBio, 0.0), H);
}

BoundaryOutput boundary_forward(Tape& tape, ParameterStore& params, const BoundaryConfig& cfg, Var r_utter,
                                const std::vector<std::size_t>& lengths) {
  const std::size_t h = cfg.hidden;
  const std::size_t B = lengths.size();
  std::size_t T = 0, N = 0;
  for (auto n : lengths) {
    if (n == 0) throw PreconditionError("boundary_forward: empty utterance");
    T = std::max(T, n);
    N += n;
  }
  if (B == 0 || r_utter.rows() != N) throw PreconditionError("boundary_forward: packed rows do not match lengths");
  std::vector<std::size_t> off(B + 1, 0);
  for (std::size_t b = 0; b < B; ++b) off[b + 1] = off[b] + lengths[b];

  // Items sorted by length, longest first, so that the items still running at
  // step t are always a prefix of the order.
  std::vector<std::size_t> order(B);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
  std::vector<std::size_t> active(T + 1, 0);
  for (std::size_t t = 0; t < T; ++t)
    while (active[t] < B && lengths[order[active[t]]] > t) ++active[t];
  // Row of token (order[j], t) in the step-major output: base[t] + j.
  std::vector<std::size_t> base(T + 1, 0);
  for (std::size_t t = 0; t < T; ++t) base[t + 1] = base[t] + active[t];

  auto first_rows = [](Var x, std::size_t n) {
    if (x.rows() == n) return x;
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return ad::gather_rows(x, std::move(rows));
  };
  auto grow_rows = [&](Var x, std::size_t n) {
    if (x.rows() == n) return x;
    const std::array<Var, 2> parts{x, tape.constant(Tensor::matrix(n - x.rows(), x.cols()))};
    return ad::concat_rows(parts);
  };

  auto run = [&](const char* dir, bool reverse) {
    const std::string p = std::string("boundary.lstm.") + dir + ".";
    Var w_hh = tape.param(params.get(p + "w_hh"));
    Var xp = ad::linear(r_utter, tape.param(params.get(p + "w_ih")), tape.param(params.get(p + "b")));
    std::vector<Var> hs(T);
    Var h_prev, c_prev;
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = reverse ? T - 1 - s : s;
      const std::size_t a = active[t];
      std::vector<std::size_t> rows(a);
      for (std::size_t j = 0; j < a; ++j) rows[j] = off[order[j]] + t;
      Var gates = B == 1 && T == 1 ? xp : ad::gather_rows(xp, std::move(rows));
      Var c_in;
      if (s == 0) {
        c_in = tape.constant(Tensor::matrix(a, h));
      } else {
        // Forward: finished items drop off the end. Reverse: items whose last
        // token is t join with a zero state.
        Var h_in = reverse ? grow_rows(h_prev, a) : first_rows(h_prev, a);
        c_in = reverse ? grow_rows(c_prev, a) : first_rows(c_prev, a);
        gates = ad::add(gates, ad::matmul(h_in, w_hh));
      }
      Var cell = ad::lstm_cell(gates, c_in);
      h_prev = ad::slice_cols(cell, 0, h);
      c_prev = ad::slice_cols(cell, h, 2 * h);
      hs[t] = h_prev;
    }
    return T == 1 ? hs[0] : ad::concat_rows(hs);
  };

  Var fw = run("fw", false);
  Var bw = run("bw", true);
  const std::array<Var, 2> both{fw, bw};
  Var h_steps = ad::concat_cols(both);
  Var h_utter;
  if (B == 1) {
    h_utter = h_steps;
  } else {
    std::vector<std::size_t> rank(B);
    for (std::size_t j = 0; j < B; ++j) rank[order[j]] = j;
    std::vector<std::size_t> packed;
    packed.reserve(N);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < lengths[b]; ++t) packed.push_back(base[t] + rank[b]);
    h_utter = ad::gather_rows(h_steps, std::move(packed));
  }
  Var e = ad::linear(h_utter, tape.param(params.get("boundary.emit.w")), tape.param(params.get("boundary.emit.b")));
  if (!e.value().all_finite()) throw NumericError("boundary: non-finite emissions");
  return {h_utter, e};
}

BoundaryOutput boundary_forward(Tape& tape, ParameterStore& params, const BoundaryConfig& cfg, Var r_utter) {
  return boundary_forward(tape, params, cfg, r_utter, {r_utter.rows()});
}

namespace {

constexpr std::size_t K = kNumBio;

double lse3(double a, double b, double c) {
  const double m = std::max({a, b, c});
  return m + std::log(std::exp(a - m) + std::exp(b - m) + std::exp(c - m));
}

void check_crf_shapes(const Tensor& transitions, const Tensor& start) {
  if (transitions.rows() != K || transitions.cols() != K) throw PreconditionError("crf: transitions must be 3 x 3");
  if (start.numel() != K) throw PreconditionError("crf: start vector must have 3 entries");
}

// Forward table alpha[i][k] over rows [off, off + n) of e.
std::vector<std::array<double, K>> forward_table(const Tensor& e, std::size_t off, std::size_t n, const Tensor& tr,
                                                 const Tensor& start) {
  std::vector<std::array<double, K>> a(n);
  for (std::size_t k = 0; k < K; ++k) a[0][k] = start[k] + e(off, k);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      a[i][k] = lse3(a[i - 1][0] + tr(0, k), a[i - 1][1] + tr(1, k), a[i - 1][2] + tr(2, k)) + e(off + i, k);
    }
  }
  return a;
}

std::vector<std::array<double, K>> backward_table(const Tensor& e, std::size_t off, std::size_t n, const Tensor& tr) {
  std::vector<std::array<double, K>> b(n);
  b[n - 1] = {0.0, 0.0, 0.0};
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t j = 0; j < K; ++j) {
      b[i][j] = lse3(tr(j, 0) + e(off + i + 1, 0) + b[i + 1][0], tr(j, 1) + e(off + i + 1, 1) + b[i + 1][1],
                     tr(j, 2) + e(off + i + 1, 2) + b[i + 1][2]);
    }
  }
  return b;
}

double score_at(const Tensor& e, std::size_t off, const Tensor& tr, const Tensor& start, const std::vector<Bio>& y) {
  double s = start[static_cast<std::size_t>(y[0])] + e(off, static_cast<std::size_t>(y[0]));
  for (std::size_t i = 1; i < y.size(); ++i) {
    s += tr(static_cast<std::size_t>(y[i - 1]), static_cast<std::size_t>(y[i])) + e(off + i, static_cast<std::size_t>(y[i]));
  }
  return s;
}

}  // namespace

double crf_path_score(const Tensor& e, const Tensor& transitions, const Tensor& start, const std::vector<Bio>& y) {
  check_crf_shapes(transitions, start);
  if (y.empty() || y.size() != e.rows() || e.cols() != K) throw PreconditionError("crf: emissions must be n x 3 with n = |y| > 0");
  return score_at(e, 0, transitions, start, y);
}

double crf_log_partition(const Tensor& e, const Tensor& transitions, const Tensor& start) {
  check_crf_shapes(transitions, start);
  if (e.rows() == 0 || e.cols() != K) throw PreconditionError("crf: zero-length sequence");
  const auto a = forward_table(e, 0, e.rows(), transitions, start);
  return lse3(a.back()[0], a.back()[1], a.back()[2]);
}

double crf_nll_value(const Tensor& e, const Tensor& transitions, const Tensor& start, const std::vector<Bio>& y) {
  if (y.empty()) throw PreconditionError("crf: zero-length sequence");
  return crf_log_partition(e, transitions, start) - crf_path_score(e, transitions, start, y);
}

Var crf_nll(Var emissions, Var transitions, Var start, const std::vector<std::vector<Bio>>& gold) {
  const Tensor& ev = emissions.value();
  check_crf_shapes(transitions.value(), start.value());
  std::size_t total = 0;
  for (const auto& y : gold) {
    if (y.empty()) throw PreconditionError("crf: zero-length sequence");
    total += y.size();
  }
  if (ev.cols() != K || ev.rows() != total) throw PreconditionError("crf: packed emissions do not match gold lengths");
  double loss = 0.0;
  std::size_t off = 0;
  for (const auto& y : gold) {
    const auto a = forward_table(ev, off, y.size(), transitions.value(), start.value());
    loss += lse3(a.back()[0], a.back()[1], a.back()[2]) - score_at(ev, off, transitions.value(), start.value(), y);
    off += y.size();
  }
  const int ei = emissions.id(), ti = transitions.id(), si = start.id();
  return emissions.tape().record(Tensor::scalar(loss), {ei, ti, si}, [ei, ti, si, gold](Tape& t, int self) {
    const double g = t.grad(self)[0];
    const Tensor& e = t.value(ei);
    const Tensor& tr = t.value(ti);
    const Tensor& st = t.value(si);
    Tensor* ge = t.needs_grad(ei) ? &t.grad_for(ei) : nullptr;
    Tensor* gt = t.needs_grad(ti) ? &t.grad_for(ti) : nullptr;
    Tensor* gs = t.needs_grad(si) ? &t.grad_for(si) : nullptr;
    std::size_t off = 0;
    for (const auto& y : gold) {
      const std::size_t n = y.size();
      const auto a = forward_table(e, off, n, tr, st);
      const auto b = backward_table(e, off, n, tr);
      const double logz = lse3(a[n - 1][0], a[n - 1][1], a[n - 1][2]);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
          const double m = std::exp(a[i][k] + b[i][k] - logz);
          if (ge) (*ge)(off + i, k) += g * m;
          if (gs && i == 0) (*gs)[k] += g * m;
        }
        if (ge) (*ge)(off + i, static_cast<std::size_t>(y[i])) -= g;
        if (gt && i > 0) {
          for (std::size_t j = 0; j < K; ++j) {
            for (std::size_t k = 0; k < K; ++k) {
              (*gt)(j, k) += g * std::exp(a[i - 1][j] + tr(j, k) + e(off + i, k) + b[i][k] - logz);
            }
          }
          (*gt)(static_cast<std::size_t>(y[i - 1]), static_cast<std::size_t>(y[i])) -= g;
        }
      }
      if (gs) (*gs)[static_cast<std::size_t>(y[0])] -= g;
      off += n;
    }
  });
}

Var crf_nll(Var emissions, Var transitions, Var start, const std::vector<Bio>& gold) {
  return crf_nll(emissions, transitions, start, std::vector<std::vector<Bio>>{gold});
}

std::vector<Bio> viterbi_decode(const Tensor& packed, std::size_t offset, std::size_t n, const Tensor& transitions,
                                const Tensor& start) {
  check_crf_shapes(transitions, start);
  if (n == 0) throw PreconditionError("viterbi_decode: zero-length sequence");
  if (packed.cols() != K || offset + n > packed.rows()) throw PreconditionError("viterbi_decode: bad emission range");
  std::vector<std::array<std::uint8_t, K>> bp(n);
  std::array<double, K> score{};
  for (std::size_t k = 0; k < K; ++k) score[k] = start[k] + packed(offset, k);
  for (std::size_t i = 1; i < n; ++i) {
    std::array<double, K> next{};
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t best = 0;
      double best_v = score[0] + transitions(0, k);
      for (std::size_t j = 1; j < K; ++j) {
        const double v = score[j] + transitions(j, k);
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      bp[i][k] = static_cast<std::uint8_t>(best);
      next[k] = best_v + packed(offset + i, k);
    }
    score = next;
  }
  std::size_t last = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (score[k] > score[last]) last = k;
  std::vector<Bio> path(n);
  path[n - 1] = static_cast<Bio>(last);
  for (std::size_t i = n - 1; i > 0; --i) {
    last = bp[i][last];
    path[i - 1] = static_cast<Bio>(last);
  }
  return path;
}

std::vector<Bio> viterbi_decode(const Tensor& e, const Tensor& transitions, const Tensor& start) {
  return viterbi_decode(e, 0, e.rows(), transitions, start);
}

}  // namespace slotfill
