// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, with the tolerances
// pinned below. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "slotfill/boundary.hpp"
#include "slotfill/checkpoint.hpp"
#include "slotfill/config.hpp"
#include "slotfill/contrastive.hpp"
#include "slotfill/evaluation.hpp"
#include "slotfill/gradcheck.hpp"
#include "slotfill/synthetic.hpp"
#include "slotfill/trainer.hpp"
#include "slotfill_cli/cli.hpp"

namespace {

using namespace slotfill;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr double kCrfTol = 1e-8;
constexpr double kCrfSeconds = 5.0;
constexpr double kNormTol = 1e-8;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kContrastiveTol = 1e-6;
constexpr double kDevF1 = 0.90;
constexpr double kUnseenMargin = 0.20;
constexpr double kSyntheticSeconds = 600.0;
constexpr double kSpeedup = 2.0;
constexpr std::size_t kLatencyUtterances = 1000;
constexpr std::size_t kLatencyBatch = 32;
constexpr std::size_t kLatencyRuns = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << x;
  return os.str();
}

std::string data_file(const char* name) { return std::string(SLOTFILL_DATA_DIR) + "/" + name; }
std::string config_file(const char* name) { return std::string(SLOTFILL_CONFIG_DIR) + "/" + name; }

Outcome crf_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_nll = 0.0, worst_max = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(6);
    const Tensor e = testing::uniform_matrix(n, 3, -2, 2, rng);
    const Tensor T = testing::uniform_matrix(3, 3, -2, 2, rng);
    const Tensor s = testing::uniform_matrix(1, 3, -2, 2, rng);
    std::vector<Bio> y(n);
    for (auto& t : y) t = static_cast<Bio>(rng.index(3));
    Tape tape(false);
    const double nll = crf_nll(tape.constant(e), tape.constant(T), tape.constant(s), y).value().item();
    worst_nll = std::max(worst_nll, std::abs(nll - testing::brute_nll(e, T, s, y)));
    worst_nll = std::max(worst_nll, std::abs(crf_nll_value(e, T, s, y) - testing::brute_nll(e, T, s, y)));
    const auto path = viterbi_decode(e, T, s);
    worst_max = std::max(worst_max, testing::brute_max_score(e, T, s) - crf_path_score(e, T, s, path));
  }
  const double secs = seconds_since(t0);
  return {worst_nll <= kCrfTol && worst_max <= kCrfTol && secs < kCrfSeconds,
          "max |nll - brute| " + fmt(worst_nll) + ", max viterbi gap " + fmt(worst_max) + ", " + fmt(secs, 3) + " s"};
}

Outcome crf_normalization() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.index(5);
    const Tensor e = testing::uniform_matrix(n, 3, -2, 2, rng);
    const Tensor T = testing::uniform_matrix(3, 3, -2, 2, rng);
    const Tensor s = testing::uniform_matrix(1, 3, -2, 2, rng);
    double total = 0.0;
    for (const auto& y : testing::all_sequences(n)) total += std::exp(-crf_nll_value(e, T, s, y));
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst <= kNormTol, "max |sum p - 1| " + fmt(worst)};
}

Outcome whole_model_gradcheck() {
  const auto t0 = Clock::now();
  auto f = testing::micro_fixture();
  SlotModel model(f.config, f.vocab.size(), 3);
  const Batch batch = testing::micro_batch(f);
  const LossOptions opts{false, true, true};
  // Backward pass of the real total loss.
  auto total = [&](Tape& t) {
    Rng r(0);
    return compute_losses(t, model, batch, r, opts).total;
  };
  // Same gradient field, counting the stop-gradient typing pair once in value.
  auto surrogate = [&](Tape& t) {
    Rng r(0);
    const LossTerms l = compute_losses(t, model, batch, r, opts);
    return ad::add(ad::add(l.boundary, ad::scale(l.typing, 0.5)), l.contrastive);
  };
  const GradCheckResult r = finite_diff_check(total, surrogate, model.params().all(), 1e-5);
  const double secs = seconds_since(t0);
  return {r.max_relative_error < kGradTol && secs < kGradSeconds,
          "max rel err " + fmt(r.max_relative_error) + " over " + std::to_string(r.entries_checked) + " entries (" +
              r.worst_parameter + "), " + fmt(secs, 3) + " s"};
}

bool starts_with(const std::string& s, const char* p) { return s.rfind(p, 0) == 0; }

Outcome stop_gradient_semantics() {
  auto f = testing::micro_fixture();
  SlotModel model(f.config, f.vocab.size(), 4);
  const Batch batch = testing::micro_batch(f);
  auto run = [&](bool utterance_term) {
    model.params().zero_grad();
    Tape tape;
    Rng rng(0);
    const LossTerms l = compute_losses(tape, model, batch, rng, {false, true, false});
    tape.backward(utterance_term ? l.typing_utterance : l.typing_label);
  };
  auto grad_norm = [&](const std::function<bool(const std::string&)>& pick) {
    double s = 0.0;
    for (const Parameter* p : model.params().all())
      if (pick(p->name))
        for (double g : p->grad.data()) s += g * g;
    return s;
  };
  auto label_path = [](const std::string& n) { return starts_with(n, "typing.adapter."); };
  auto utterance_path = [](const std::string& n) {
    return starts_with(n, "typing.fuse.") || starts_with(n, "typing.boundary_emb") || starts_with(n, "boundary.");
  };
  run(true);
  const double t1_label = grad_norm(label_path), t1_utter = grad_norm(utterance_path);
  run(false);
  const double t2_utter = grad_norm(utterance_path), t2_label = grad_norm(label_path);
  const bool pass = t1_label == 0.0 && t2_utter == 0.0 && t1_utter > 0.0 && t2_label > 0.0;
  return {pass, "term1 |g|^2 adapter " + fmt(t1_label) + " fusion " + fmt(t1_utter) + "; term2 |g|^2 fusion " +
                    fmt(t2_utter) + " adapter " + fmt(t2_label)};
}

double contrastive_value(const Tensor& sim, const SlotPairSet& pairs, double tau) {
  ContrastiveConfig cfg;
  cfg.tau = tau;
  Tape tape(false);
  return contrastive_loss(tape.constant(sim), pairs, cfg).value().item();
}

Outcome contrastive_oracle() {
  const SlotPairSet three = collect_slot_pairs({0, 0, 1});
  const double constant_case = contrastive_value(Tensor::matrix(3, 3, 0.42), three, 0.5);
  const double want_constant = std::log(static_cast<double>(three.positives.size() + three.negatives.size())) -
                               std::log(static_cast<double>(three.positives.size()));
  SlotPairSet one;
  one.num_tokens = 3;
  one.positives = {{0, 1}};
  one.negatives = {{0, 2}};
  Tensor s = Tensor::matrix(3, 3);
  s(0, 1) = 1.0;
  s(0, 2) = -1.0;
  const double pair_case = contrastive_value(s, one, 0.5);
  const double want_pair = -std::log(std::exp(2.0) / (std::exp(2.0) + std::exp(-2.0)));
  Rng rng(303);
  int checked = 0, monotone = 0;
  while (checked < 100) {
    std::vector<int> types(2 + rng.index(10));
    for (auto& t : types) t = static_cast<int>(rng.index(4));
    const SlotPairSet p = collect_slot_pairs(types);
    if (p.positives.empty() || p.negatives.empty()) continue;
    Tensor sim = Tensor::matrix(types.size(), types.size());
    for (auto& x : sim.data()) x = rng.uniform(-1, 1);
    Tensor raised = sim;
    for (auto [i, j] : p.positives) raised(i, j) += rng.uniform(0.01, 1.0);
    ++checked;
    monotone += contrastive_value(raised, p, 0.5) < contrastive_value(sim, p, 0.5);
  }
  const bool pass = std::abs(constant_case - want_constant) <= kContrastiveTol &&
                    std::abs(pair_case - want_pair) <= kContrastiveTol && monotone == checked;
  return {pass, "constant " + fmt(constant_case, 8) + " (log 3), pair " + fmt(pair_case, 8) + ", monotone " +
                    std::to_string(monotone) + "/" + std::to_string(checked)};
}

struct SeedResult {
  double dev_f1 = 0.0;
  double unseen_f1 = 0.0;
  double control_unseen_f1 = 0.0;
  double target_f1 = 0.0;
  double target_f1_no_ctr = 0.0;
};

Outcome synthetic_benchmark() {
  const auto t0 = Clock::now();
  const SyntheticSpec spec = load_synthetic_spec(data_file("flights.spec"));
  std::vector<SeedResult> results;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Config cfg = load_config(config_file("synthetic.cfg"), {"trainer.seed=" + std::to_string(seed)});
    const DomainSplit split = generate_synthetic(spec, seed);
    const PreparedData data = prepare_data(split, cfg.data.dev_fraction, seed);
    const InputOptions input{cfg.data.max_seq_len, cfg.model.encoder.positions};
    SeedResult r;
    {
      SlotModel model(cfg.model, data.vocab.size(), seed);
      Trainer trainer(model, cfg);
      r.dev_f1 = trainer.fit(data).best_dev_f1;
      const EvalReport rep =
          evaluate_zero_shot(model, data.vocab, data.labels, data.target_prefix, data.target, input, 32);
      r.unseen_f1 = rep.unseen.f1();
      r.target_f1 = rep.overall.f1();
      Rng control_rng(1000 + seed);
      const LabelVocabulary control =
          shuffled_label_control(data.labels, data.target_prefix, data.vocab, control_rng);
      r.control_unseen_f1 =
          evaluate_zero_shot(model, data.vocab, control, data.target_prefix, data.target, input, 32).unseen.f1();
    }
    {
      Config off = cfg;
      off.model.contrastive.enabled = false;
      SlotModel model(off.model, data.vocab.size(), seed);
      Trainer trainer(model, off);
      trainer.fit(data);
      r.target_f1_no_ctr =
          evaluate_zero_shot(model, data.vocab, data.labels, data.target_prefix, data.target, input, 32).overall.f1();
    }
    std::cerr << "  seed " << seed << ": dev " << fmt(r.dev_f1) << " unseen " << fmt(r.unseen_f1) << " control "
              << fmt(r.control_unseen_f1) << " target " << fmt(r.target_f1) << " no-ctr " << fmt(r.target_f1_no_ctr)
              << "\n";
    results.push_back(r);
  }
  double min_dev = 1.0, unseen = 0.0, control = 0.0, on = 0.0, off = 0.0;
  for (const auto& r : results) {
    min_dev = std::min(min_dev, r.dev_f1);
    unseen += r.unseen_f1 / 5.0;
    control += r.control_unseen_f1 / 5.0;
    on += r.target_f1 / 5.0;
    off += r.target_f1_no_ctr / 5.0;
  }
  const double secs = seconds_since(t0);
  const bool pass = min_dev >= kDevF1 && unseen - control >= kUnseenMargin && on != off && secs < kSyntheticSeconds;
  return {pass, "min dev F1 " + fmt(min_dev) + ", mean unseen " + fmt(unseen) + " vs control " + fmt(control) +
                    ", target F1 with/without slot CL " + fmt(on) + "/" + fmt(off) + ", " + fmt(secs, 4) + " s"};
}

Tensor utterance_states(SlotModel& model, const ModelConfig& mc, const testing::MicroFixture& f,
                        const LabelVocabulary& labels) {
  std::vector<ModelInput> in;
  for (const auto& u : f.data) in.push_back(build_model_input(u, labels, f.vocab));
  const std::vector<std::size_t> order{0, 1};
  const Batch batch = collate(in, order);
  Tape tape(false);
  Rng rng(0);
  return encode(tape, model.params(), mc.encoder, batch, rng).r_utter.value();
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.raw(), b.raw(), a.numel() * sizeof(double)) == 0;
}

Outcome interaction_policy_wiring() {
  auto f = testing::micro_fixture();
  LabelVocabulary substituted;
  substituted.add("five_pm", true, false);
  substituted.add("paris", true, false);
  LabelVocabulary longer;
  longer.add("to_paris", true, false);
  longer.add("five_pm_now", true, false);
  longer.add("city", true, false);
  auto check = [&](InteractionPolicy policy) {
    ModelConfig mc = f.config;
    mc.encoder.interaction = policy;
    SlotModel model(mc, f.vocab.size(), 7);
    const Tensor base = utterance_states(model, mc, f, f.labels);
    return std::pair{bit_equal(base, utterance_states(model, mc, f, substituted)),
                     bit_equal(base, utterance_states(model, mc, f, longer))};
  };
  const auto [blocked_words, blocked_longer] = check(InteractionPolicy::kNoUtteranceToLabel);
  const auto [full_words, full_longer] = check(InteractionPolicy::kFull);
  const bool pass = blocked_words && blocked_longer && !full_words && !full_longer;
  auto yn = [](bool b) { return b ? "yes" : "no"; };
  return {pass, std::string("r_utter bit-identical under new label words / longer prefix: no-utterance-to-label ") +
                    yn(blocked_words) + "/" + yn(blocked_longer) + ", full " + yn(full_words) + "/" + yn(full_longer)};
}

Outcome latency_methodology() {
  const Config cfg;
  const DomainSplit split = generate_synthetic(load_synthetic_spec(data_file("flights.spec")), 0);
  const PreparedData data = prepare_data(split, cfg.data.dev_fraction, 0);
  std::vector<AnnotatedUtterance> pool = data.target;
  pool.insert(pool.end(), data.train.begin(), data.train.end());
  std::vector<ModelInput> inputs;
  const InputOptions input{cfg.data.max_seq_len, cfg.model.encoder.positions};
  for (std::size_t i = 0; i < kLatencyUtterances; ++i)
    inputs.push_back(build_model_input(pool.at(i), data.labels, data.target_prefix, data.vocab, input));
  SlotModel model(cfg.model, data.vocab.size(), 0);
  const LatencyResult r = compare_latency(model, inputs, kLatencyBatch, kLatencyRuns);
  return {r.speedup() >= kSpeedup, "batched " + fmt(r.batched) + " s, instance " + fmt(r.instance) + " s, speedup " +
                                       fmt(r.speedup(), 3) + "x on " + std::to_string(inputs.size()) + " utterances"};
}

Outcome checkpoint_roundtrip() {
  auto f = testing::micro_fixture();
  Config cfg;
  cfg.model = f.config;
  SlotModel model(cfg.model, f.vocab.size(), 9);
  const fs::path path = fs::temp_directory_path() / "slotfill_acceptance.ckpt";
  const std::uint64_t fp = checkpoint_fingerprint(cfg, f.vocab, f.labels);
  save_checkpoint(path, model.params(), make_checkpoint_meta(cfg, f.vocab, f.labels), fp);
  const Checkpoint ck = read_checkpoint(path);
  verify_fingerprint(ck, fp);
  SlotModel restored(cfg.model, f.vocab.size(), 10);
  restore_parameters(restored.params(), ck);
  bool exact = true;
  const auto a = model.params().all(), b = restored.params().all();
  for (std::size_t i = 0; i < a.size(); ++i) exact = exact && bit_equal(a[i]->value, b[i]->value);

  std::string corrupt_msg;
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes{std::istreambuf_iterator<char>(in), {}};
    bytes[bytes.size() - 3] ^= 0x10;
    std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    read_checkpoint(path);
  } catch (const CheckpointError& e) {
    corrupt_msg = e.what();
  }
  bool mismatch_refused = false;
  Vocabulary altered = f.vocab;
  altered.add("unseen");
  try {
    verify_fingerprint(ck, checkpoint_fingerprint(cfg, altered, f.labels));
  } catch (const CheckpointError&) {
    mismatch_refused = true;
  }
  fs::remove(path);
  const bool pass = exact && !corrupt_msg.empty() && mismatch_refused;
  return {pass, std::string("bit-exact ") + (exact ? "yes" : "no") + "; corrupt byte: " +
                    (corrupt_msg.empty() ? "accepted" : corrupt_msg) +
                    "; fingerprint mismatch " + (mismatch_refused ? "refused" : "accepted")};
}

int run_cli(const std::vector<std::string>& args, std::string* err_out = nullptr) {
  std::istringstream in;
  std::ostringstream out, err;
  const int code = cli::run_cli(args, in, out, err);
  if (err_out) *err_out = err.str();
  return code;
}

Outcome train_determinism() {
  const fs::path dir = fs::temp_directory_path() / "slotfill_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string err;
  if (run_cli({"gen-synth", "--spec", data_file("flights.spec"), "--out", (dir / "corpus").string(), "--seed", "4"},
              &err) != cli::kExitOk)
    return {false, "gen-synth failed: " + err};
  std::vector<std::string> logs;
  for (const char* tag : {"a", "b"}) {
    const fs::path log = dir / (std::string(tag) + ".tsv");
    if (run_cli({"train", "--config", config_file("synthetic.cfg"), "--manifest",
                 (dir / "corpus" / "manifest.txt").string(), "--set", "trainer.epochs=3", "--seed", "21",
                 "--checkpoint", (dir / (std::string(tag) + ".ckpt")).string(), "--metrics-log", log.string()},
                &err) != cli::kExitOk)
      return {false, "train failed: " + err};
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    logs.push_back(ss.str());
  }
  fs::remove_all(dir);
  const auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
  return {!logs[0].empty() && logs[0] == logs[1],
          std::to_string(lines) + "-epoch logs " + (logs[0] == logs[1] ? "identical" : "differ")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "crf-oracle", crf_oracle},
      {2, "crf-normalization", crf_normalization},
      {3, "whole-model-gradcheck", whole_model_gradcheck},
      {4, "stop-gradient", stop_gradient_semantics},
      {5, "contrastive-oracle", contrastive_oracle},
      {6, "synthetic-zero-shot", synthetic_benchmark},
      {7, "interaction-policy", interaction_policy_wiring},
      {8, "batched-latency", latency_methodology},
      {9, "checkpoint-roundtrip", checkpoint_roundtrip},
      {10, "train-determinism", train_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << c.id << "  " << std::left << std::setw(22)
              << c.name << std::right << "  " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
