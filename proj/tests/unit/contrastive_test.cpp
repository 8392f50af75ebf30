// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/contrastive.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "slotfill/gradcheck.hpp"
#include "slotfill/init.hpp"

namespace slotfill {
namespace {

double loss_value(const Tensor& sim, const SlotPairSet& pairs, double tau, bool per_anchor = false) {
  ContrastiveConfig cfg;
  cfg.tau = tau;
  cfg.per_anchor = per_anchor;
  Tape tape(false);
  return contrastive_loss(tape.constant(sim), pairs, cfg).value().item();
}

TEST(CollectSlotPairs, Counts) {
  const SlotPairSet p = collect_slot_pairs({0, 0, 1});
  EXPECT_EQ(p.positives.size(), 2u);
  EXPECT_EQ(p.negatives.size(), 4u);
  EXPECT_TRUE(collect_slot_pairs({}).empty());
  EXPECT_TRUE(collect_slot_pairs({3}).empty());
}

TEST(ContrastiveLoss, ConstantSimilarityIsLogThree) {
  const SlotPairSet p = collect_slot_pairs({0, 0, 1});
  EXPECT_NEAR(loss_value(Tensor::matrix(3, 3, 0.37), p, 0.5), std::log(3.0), 1e-12);
}

TEST(ContrastiveLoss, OnePositiveOneNegative) {
  SlotPairSet p;
  p.num_tokens = 3;
  p.positives = {{0, 1}};
  p.negatives = {{0, 2}};
  Tensor s = Tensor::matrix(3, 3);
  s(0, 1) = 1.0;
  s(0, 2) = -1.0;
  const double want = -std::log(std::exp(2.0) / (std::exp(2.0) + std::exp(-2.0)));
  EXPECT_NEAR(want, 0.0181, 1e-4);
  EXPECT_NEAR(loss_value(s, p, 0.5), want, 1e-12);
}

TEST(ContrastiveLoss, NoNegativesEqualSimilarityIsZero) {
  const SlotPairSet p = collect_slot_pairs({2, 2, 2});
  EXPECT_NEAR(loss_value(Tensor::matrix(3, 3, 0.8), p, 0.1), 0.0, 1e-14);
}

TEST(ContrastiveLoss, NoPositivesIsZero) {
  const SlotPairSet p = collect_slot_pairs({0, 1});
  EXPECT_EQ(loss_value(Tensor::matrix(2, 2, 0.5), p, 0.5), 0.0);
}

TEST(ContrastiveLoss, NonPositiveTemperatureRejected) {
  ContrastiveConfig cfg;
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg.tau = -1.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(ContrastiveLoss, RaisingPositivesLowersLoss) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> types(2 + rng.index(8));
    for (auto& t : types) t = static_cast<int>(rng.index(3));
    const SlotPairSet p = collect_slot_pairs(types);
    if (p.positives.empty() || p.negatives.empty()) continue;
    const std::size_t m = types.size();
    Tensor s = Tensor::matrix(m, m);
    for (auto& x : s.data()) x = rng.uniform(-1, 1);
    Tensor raised = s;
    for (auto [i, j] : p.positives) raised(i, j) += rng.uniform(0.01, 0.5);
    EXPECT_LT(loss_value(raised, p, 0.5), loss_value(s, p, 0.5));
  }
}

TEST(ContrastiveLoss, PairOrderInvariance) {
  Rng rng(2);
  const SlotPairSet p = collect_slot_pairs({0, 1, 0, 1, 1});
  Tensor s = Tensor::matrix(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i; j < 5; ++j) s(i, j) = s(j, i) = rng.uniform(-1, 1);
  SlotPairSet swapped = p;
  for (auto& [i, j] : swapped.positives) std::swap(i, j);
  for (auto& [i, j] : swapped.negatives) std::swap(i, j);
  EXPECT_NEAR(loss_value(s, p, 0.3), loss_value(s, swapped, 0.3), 1e-12);
  EXPECT_NEAR(loss_value(s, p, 0.3, true), loss_value(s, swapped, 0.3, true), 1e-12);
}

TEST(MetricDistance, HandCases) {
  const std::vector<double> a{0.3, -0.2, 1.1};
  EXPECT_NEAR(metric_distance(a, a, Metric::kCosine), 1.0, 1e-15);
  EXPECT_EQ(metric_distance(a, a, Metric::kMse), 0.0);
  EXPECT_EQ(metric_distance(a, a, Metric::kSmoothL1), 0.0);
  EXPECT_NEAR(metric_distance(a, a, Metric::kKl), 0.0, 1e-15);
  const std::vector<double> x{1, 0}, y{0, 1};
  EXPECT_EQ(metric_distance(x, y, Metric::kMse), -1.0);
  EXPECT_EQ(metric_distance(x, y, Metric::kSmoothL1), -0.5);
  const std::vector<double> far{3, 0};
  EXPECT_EQ(metric_distance(far, std::vector<double>{0, 0}, Metric::kSmoothL1), -1.25);
}

TEST(PairwiseSimilarity, MatchesScalarMetricAndGradchecks) {
  Rng rng(3);
  for (Metric m : {Metric::kCosine, Metric::kMse, Metric::kSmoothL1, Metric::kKl}) {
    ParameterStore ps;
    Parameter& s = ps.add("s", normal_tensor(4, 3, 1.0, rng), ParamGroup::kHead);
    Tape tape(false);
    const Tensor sim = pairwise_similarity(tape.param(s), m).value();
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_NEAR(sim(i, j), metric_distance(s.value.row_span(i), s.value.row_span(j), m), 1e-12) << to_string(m);
    ContrastiveConfig cfg;
    cfg.metric = m;
    const SlotPairSet pairs = collect_slot_pairs({0, 1, 0, 1});
    auto f = [&](Tape& t) { return contrastive_loss(pairwise_similarity(t.param(s), m), pairs, cfg); };
    EXPECT_LT(finite_diff_check(f, ps.all()).max_relative_error, 1e-6) << to_string(m);
  }
}

TEST(Project, ZeroWeightsAndReluClamp) {
  Rng rng(4);
  ParameterStore ps;
  ContrastiveConfig cfg;
  cfg.projection_dim = 3;
  init_contrastive_params(ps, 2, cfg, rng);
  ps.get("contrastive.proj.w").value.fill(0.0);
  ps.get("contrastive.proj.b").value.fill(0.0);
  Tape tape(false);
  for (double x : project(tape, ps, tape.constant(normal_tensor(4, 2, 1.0, rng))).value().data()) EXPECT_EQ(x, 0.0);
  ps.get("contrastive.proj.b").value.fill(-5.0);
  for (double x : project(tape, ps, tape.constant(Tensor::matrix(2, 2, 0.1))).value().data()) EXPECT_EQ(x, 0.0);
}

TEST(Project, GradientThroughHead) {
  Rng rng(5);
  ParameterStore ps;
  ContrastiveConfig cfg;
  cfg.projection_dim = 4;
  init_contrastive_params(ps, 3, cfg, rng);
  ps.get("contrastive.proj.b").value.fill(0.5);
  Parameter& r = ps.add("r", normal_tensor(5, 3, 0.3, rng), ParamGroup::kHead);
  const SlotPairSet pairs = collect_slot_pairs({0, 0, 1, 1, 0});
  auto f = [&](Tape& t) { return contrastive_loss(pairwise_similarity(project(t, ps, t.param(r)), cfg.metric), pairs, cfg); };
  EXPECT_LT(finite_diff_check(f, ps.all()).max_relative_error, 1e-6);
}

}  // namespace
}  // namespace slotfill
