// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Decode latency by batch size, CRF kernels, and one training step.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "slotfill/boundary.hpp"
#include "slotfill/config.hpp"
#include "slotfill/evaluation.hpp"
#include "slotfill/synthetic.hpp"
#include "slotfill/trainer.hpp"

namespace {

using namespace slotfill;

struct Fixture {
  Config cfg;
  PreparedData data;
  std::unique_ptr<SlotModel> model;
  std::vector<ModelInput> inputs;

  Fixture() {
    const DomainSplit split = generate_synthetic(load_synthetic_spec(std::string(SLOTFILL_DATA_DIR) + "/flights.spec"), 0);
    data = prepare_data(split, cfg.data.dev_fraction, 0);
    model = std::make_unique<SlotModel>(cfg.model, data.vocab.size(), 0);
    const InputOptions input{cfg.data.max_seq_len, cfg.model.encoder.positions};
    std::vector<AnnotatedUtterance> pool = data.target;
    pool.insert(pool.end(), data.train.begin(), data.train.end());
    for (std::size_t i = 0; i < 256; ++i)
      inputs.push_back(build_model_input(pool.at(i), data.labels, data.target_prefix, data.vocab, input));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Decode(benchmark::State& state) {
  Fixture& f = fixture();
  const auto bs = static_cast<std::size_t>(state.range(0));
  const DecodeMode mode = bs == 1 ? DecodeMode::kInstance : DecodeMode::kBatched;
  for (auto _ : state) benchmark::DoNotOptimize(benchmark_latency(*f.model, f.inputs, bs, mode));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.inputs.size()));
}
BENCHMARK(BM_Decode)->Arg(1)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  Fixture& f = fixture();
  const auto batches = make_length_batches(f.inputs, 32);
  Rng rng(1);
  std::size_t k = 0;
  for (auto _ : state) {
    Tape tape;
    const LossTerms l = compute_losses(tape, *f.model, batches[k++ % batches.size()], rng, {true, true, true});
    tape.backward(l.total);
    f.model->params().zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

struct CrfInputs {
  Tensor e, T, s;
  std::vector<Bio> y;
  explicit CrfInputs(std::size_t n) : e(Tensor::matrix(n, 3)), T(Tensor::matrix(3, 3)), s(Tensor::matrix(1, 3)), y(n) {
    Rng rng(2);
    for (auto* t : {&e, &T, &s})
      for (double& x : t->data()) x = rng.uniform(-2, 2);
    for (auto& b : y) b = static_cast<Bio>(rng.index(3));
  }
};

void BM_CrfNll(benchmark::State& state) {
  const CrfInputs in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(crf_nll_value(in.e, in.T, in.s, in.y));
}
BENCHMARK(BM_CrfNll)->Arg(8)->Arg(32)->Arg(128);

void BM_Viterbi(benchmark::State& state) {
  const CrfInputs in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(viterbi_decode(in.e, in.T, in.s));
}
BENCHMARK(BM_Viterbi)->Arg(8)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
