// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/boundary.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "slotfill/gradcheck.hpp"

namespace slotfill {
namespace {

using testing::all_sequences;
using testing::brute_max_score;
using testing::brute_nll;
using testing::brute_score;
using testing::uniform_matrix;

TEST(CrfNll, UniformSingleTokenIsLogThree) {
  const Tensor e = Tensor::matrix(1, 3), T = Tensor::matrix(3, 3), s = Tensor::matrix(1, 3);
  for (Bio y : {Bio::B, Bio::I, Bio::O}) EXPECT_NEAR(crf_nll_value(e, T, s, {y}), std::log(3.0), 1e-15);
}

TEST(CrfNll, MatchesEnumerationForTwoTokens) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor e = uniform_matrix(2, 3, -0.5, 0.5, rng), T = uniform_matrix(3, 3, -0.5, 0.5, rng);
    const Tensor s = uniform_matrix(1, 3, -0.5, 0.5, rng);
    for (const auto& y : all_sequences(2)) EXPECT_NEAR(crf_nll_value(e, T, s, y), brute_nll(e, T, s, y), 1e-10);
  }
}

TEST(CrfNll, MatchesEnumerationUpToSixTokens) {
  Rng rng(2);
  for (std::size_t n = 1; n <= 6; ++n) {
    const Tensor e = uniform_matrix(n, 3, -2, 2, rng), T = uniform_matrix(3, 3, -2, 2, rng);
    const Tensor s = uniform_matrix(1, 3, -2, 2, rng);
    std::vector<Bio> y(n);
    for (auto& t : y) t = static_cast<Bio>(rng.index(3));
    EXPECT_NEAR(crf_nll_value(e, T, s, y), brute_nll(e, T, s, y), 1e-8);
    EXPECT_NEAR(crf_path_score(e, T, s, y), brute_score(e, T, s, y), 1e-12);
  }
}

TEST(CrfNll, ZeroLengthThrows) {
  EXPECT_THROW(crf_nll_value(Tensor::matrix(0, 3), Tensor::matrix(3, 3), Tensor::matrix(1, 3), {}), PreconditionError);
}

TEST(CrfNll, DifferentiableMatchesValueAndGradcheck) {
  Rng rng(3);
  ParameterStore ps;
  Parameter& e = ps.add("e", uniform_matrix(5, 3, -2, 2, rng), ParamGroup::kHead);
  Parameter& T = ps.add("T", uniform_matrix(3, 3, -2, 2, rng), ParamGroup::kHead);
  Parameter& s = ps.add("s", uniform_matrix(1, 3, -2, 2, rng), ParamGroup::kHead);
  const std::vector<std::vector<Bio>> gold{{Bio::B, Bio::I}, {Bio::O, Bio::B, Bio::O}};
  auto f = [&](Tape& t) { return crf_nll(t.param(e), t.param(T), t.param(s), gold); };
  {
    Tape t(false);
    const Tensor e0 = Tensor::matrix(2, 3, std::vector<double>(e.value.raw(), e.value.raw() + 6));
    const Tensor e1 = Tensor::matrix(3, 3, std::vector<double>(e.value.raw() + 6, e.value.raw() + 15));
    const double want = crf_nll_value(e0, T.value, s.value, gold[0]) + crf_nll_value(e1, T.value, s.value, gold[1]);
    EXPECT_NEAR(f(t).value().item(), want, 1e-12);
  }
  EXPECT_LT(finite_diff_check(f, ps.all()).max_relative_error, 1e-6);
}

TEST(Viterbi, SingleTokenArgmax) {
  const Tensor e = Tensor::matrix(1, 3, std::vector<double>{2, 0, 1});
  EXPECT_EQ(viterbi_decode(e, Tensor::matrix(3, 3), Tensor::matrix(1, 3)), (std::vector<Bio>{Bio::B}));
}

TEST(Viterbi, ZeroTransitionsGivePerPositionArgmax) {
  Rng rng(4);
  const Tensor e = uniform_matrix(6, 3, -2, 2, rng);
  const auto path = viterbi_decode(e, Tensor::matrix(3, 3), Tensor::matrix(1, 3));
  for (std::size_t i = 0; i < 6; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (e(i, k) > e(i, best)) best = k;
    EXPECT_EQ(static_cast<std::size_t>(path[i]), best);
  }
}

TEST(Viterbi, AttainsBruteForceMaximum) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(6);
    const Tensor e = uniform_matrix(n, 3, -2, 2, rng), T = uniform_matrix(3, 3, -2, 2, rng);
    const Tensor s = uniform_matrix(1, 3, -2, 2, rng);
    const auto path = viterbi_decode(e, T, s);
    EXPECT_NEAR(crf_path_score(e, T, s, path), brute_max_score(e, T, s), 1e-12);
  }
}

TEST(BoundaryForward, SingleTokenShape) {
  ParameterStore ps;
  Rng rng(6);
  BoundaryConfig cfg;
  cfg.hidden = 5;
  init_boundary_params(ps, 4, cfg, rng);
  Tape tape(false);
  const BoundaryOutput out = boundary_forward(tape, ps, cfg, tape.constant(uniform_matrix(1, 4, -1, 1, rng)));
  EXPECT_EQ(out.h_utter.rows(), 1u);
  EXPECT_EQ(out.h_utter.cols(), 10u);
  EXPECT_EQ(out.emissions.cols(), 3u);
}

TEST(BoundaryForward, ZeroWeightsGiveBias) {
  ParameterStore ps;
  Rng rng(7);
  BoundaryConfig cfg;
  cfg.hidden = 3;
  init_boundary_params(ps, 4, cfg, rng);
  for (Parameter* p : ps.all()) p->value.fill(0.0);
  Parameter& bias = ps.get("boundary.emit.b");
  bias.value = Tensor::matrix(1, 3, std::vector<double>{0.5, -1.0, 2.0});
  Tape tape(false);
  const BoundaryOutput out = boundary_forward(tape, ps, cfg, tape.constant(Tensor::matrix(4, 4)), {3, 1});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.emissions.value()(r, c), bias.value[c]);
}

TEST(BoundaryForward, PackedMatchesPerSequence) {
  ParameterStore ps;
  Rng rng(8);
  BoundaryConfig cfg;
  cfg.hidden = 4;
  init_boundary_params(ps, 3, cfg, rng);
  const Tensor x = uniform_matrix(7, 3, -1, 1, rng);
  Tape tape(false);
  const BoundaryOutput packed = boundary_forward(tape, ps, cfg, tape.constant(x), {2, 4, 1});
  std::size_t off = 0;
  for (std::size_t n : {2u, 4u, 1u}) {
    const Tensor xi = Tensor::matrix(n, 3, std::vector<double>(x.raw() + off * 3, x.raw() + (off + n) * 3));
    const BoundaryOutput one = boundary_forward(tape, ps, cfg, tape.constant(xi));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        EXPECT_NEAR(packed.emissions.value()(off + r, c), one.emissions.value()(r, c), 1e-14);
    off += n;
  }
}

TEST(BoundaryForward, GradientMatchesFiniteDifferences) {
  ParameterStore ps;
  Rng rng(9);
  BoundaryConfig cfg;
  cfg.hidden = 3;
  init_boundary_params(ps, 2, cfg, rng);
  Parameter& x = ps.add("x", uniform_matrix(5, 2, -1, 1, rng), ParamGroup::kHead);
  const std::vector<std::vector<Bio>> gold{{Bio::B, Bio::I, Bio::O}, {Bio::O, Bio::B}};
  auto f = [&](Tape& t) {
    const BoundaryOutput o = boundary_forward(t, ps, cfg, t.param(x), {3, 2});
    return crf_nll(o.emissions, t.param(ps.get("boundary.crf.transitions")), t.param(ps.get("boundary.crf.start")), gold);
  };
  const auto r = finite_diff_check(f, ps.all());
  EXPECT_LT(r.max_relative_error, 1e-5) << r.worst_parameter << "[" << r.worst_index << "] " << r.worst_analytic << " vs " << r.worst_numeric;
}

}  // namespace
}  // namespace slotfill
