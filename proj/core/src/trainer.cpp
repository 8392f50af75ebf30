// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace slotfill {

Vocabulary build_vocabulary(const std::vector<AnnotatedUtterance>& source, const LabelVocabulary& labels) {
  std::vector<std::string> words;
  for (const auto& u : source) words.insert(words.end(), u.tokens.begin(), u.tokens.end());
  for (const auto& l : labels.labels()) words.insert(words.end(), l.tokens.begin(), l.tokens.end());
  return Vocabulary::from_words(std::move(words));
}

PreparedData prepare_data(const DomainSplit& split, double dev_fraction, std::uint64_t seed) {
  if (split.source.empty()) throw TrainingError("no source-domain training data");
  PreparedData d;
  d.labels = split.labels;
  d.vocab = build_vocabulary(split.source, split.labels);
  d.source_prefix = split.labels.source_indices();
  d.target_prefix = split.labels.target_indices();
  if (!split.dev.empty()) {
    d.train = split.source;
    d.dev = split.dev;
  } else {
    std::vector<std::size_t> order(split.source.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_dev = static_cast<std::size_t>(std::floor(dev_fraction * static_cast<double>(order.size())));
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_dev ? d.dev : d.train).push_back(split.source[order[i]]);
    }
  }
  if (d.train.empty()) throw TrainingError("dev split leaves no training data");
  d.target = split.target;
  return d;
}

CheckpointMeta make_checkpoint_meta(const Config& cfg, const Vocabulary& vocab, const LabelVocabulary& labels) {
  CheckpointMeta m;
  m.config_text = dump_config(cfg);
  m.vocab = vocab.tokens();
  for (const auto& l : labels.labels()) {
    m.label_names.push_back(l.name);
    m.label_source.push_back(l.source ? 1 : 0);
    m.label_target.push_back(l.target ? 1 : 0);
  }
  m.vocab_hash = vocab.hash();
  m.label_hash = labels.hash();
  return m;
}

std::uint64_t checkpoint_fingerprint(const Config& cfg, const Vocabulary& vocab, const LabelVocabulary& labels) {
  return config_fingerprint(dump_model_config(cfg), vocab.hash(), labels.hash());
}

LossTerms compute_losses(Tape& tape, SlotModel& model, const Batch& batch, Rng& rng, const LossOptions& opts) {
  const ModelConfig& mc = model.config();
  const bool with_ctr = opts.contrastive && mc.contrastive.enabled;
  ForwardPass fp = forward(tape, model, batch, rng, ForwardOptions{opts.training, with_ctr, false});
  ParameterStore& ps = model.params();
  LossTerms t;
  t.boundary = crf_nll(fp.bdy.emissions, tape.param(ps.get("boundary.crf.transitions")),
                       tape.param(ps.get("boundary.crf.start")), batch.y_bd);

  std::vector<std::size_t> rows, groups, targets;
  std::vector<int> types;
  for (std::size_t b = 0; b < batch.size; ++b) {
    for (std::size_t i = 0; i < batch.utt_len[b]; ++i) {
      const int y = batch.y_type[b][i];
      if (batch.y_bd[b][i] == Bio::O || y < 0) continue;
      rows.push_back(fp.offsets[b] + i);
      groups.push_back(b);
      targets.push_back(static_cast<std::size_t>(y));
      types.push_back(y);
    }
  }
  t.slot_tokens = rows.size();
  const Var zero = tape.constant(Tensor::scalar(0.0));
  if (opts.typing) {
    TypingLoss tl = typing_loss(tape, fp.u, fp.v, batch.num_labels(), rows, groups, targets);
    t.typing = tl.total;
    t.typing_utterance = tl.utterance_term;
    t.typing_label = tl.label_term;
  } else {
    t.typing = t.typing_utterance = t.typing_label = zero;
  }
  if (with_ctr && !rows.empty()) {
    Var s = ad::gather_rows(fp.s, rows);
    t.contrastive = contrastive_loss(pairwise_similarity(s, mc.contrastive.metric), collect_slot_pairs(types),
                                     mc.contrastive);
  } else {
    t.contrastive = zero;
  }
  t.total = ad::add(ad::add(t.boundary, t.typing), t.contrastive);
  return t;
}

Trainer::Trainer(SlotModel& model, const Config& cfg)
    : model_(model),
      cfg_(cfg),
      opt_(model.params().all(), cfg.trainer.encoder_lr, cfg.trainer.head_lr,
           AdamWConfig{0.9, 0.999, 1e-8, cfg.trainer.weight_decay}),
      rng_(cfg.trainer.seed ^ 0x5eedf00dULL) {}

StepLosses Trainer::train_step(const Batch& batch) {
  Tape tape;
  LossTerms t = compute_losses(tape, model_, batch, rng_,
                               LossOptions{true, cfg_.trainer.typing_loss, cfg_.model.contrastive.enabled});
  StepLosses s{t.boundary.value().item(), t.typing.value().item(), t.contrastive.value().item(),
               t.total.value().item()};
  for (auto [name, v] : {std::pair{"boundary loss", s.boundary}, std::pair{"typing loss", s.typing},
                         std::pair{"contrastive loss", s.contrastive}}) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + name + " in training step");
  }
  opt_.zero_grad();
  tape.backward(t.total);
  opt_.step();
  return s;
}

namespace {

std::vector<Tensor> snapshot(const ParameterStore& ps) {
  std::vector<Tensor> out;
  for (const Parameter* p : ps.all()) out.push_back(p->value);
  return out;
}

void restore(ParameterStore& ps, const std::vector<Tensor>& values) {
  auto all = ps.all();
  for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = values[i];
}

}  // namespace

FitResult Trainer::fit(const PreparedData& data, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (data.train.empty()) throw TrainingError("no source-domain training data");
  if (data.source_prefix.empty()) throw TrainingError("no source-domain labels");
  const InputOptions input{cfg_.data.max_seq_len, cfg_.model.encoder.positions};
  std::vector<ModelInput> inputs;
  inputs.reserve(data.train.size());
  for (const auto& u : data.train) inputs.push_back(build_model_input(u, data.labels, data.source_prefix, data.vocab, input));

  FitResult result;
  std::vector<Tensor> best;
  for (std::size_t epoch = 1; epoch <= cfg_.trainer.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const auto batches = make_batches(inputs, cfg_.trainer.batch_size, rng_.next_u64());
    for (const Batch& b : batches) {
      const StepLosses s = train_step(b);
      rec.loss.boundary += s.boundary;
      rec.loss.typing += s.typing;
      rec.loss.contrastive += s.contrastive;
      rec.loss.total += s.total;
    }
    const double n = static_cast<double>(batches.size());
    rec.loss.boundary /= n;
    rec.loss.typing /= n;
    rec.loss.contrastive /= n;
    rec.loss.total /= n;
    if (!data.dev.empty()) {
      rec.dev = score_dataset(model_, data.vocab, data.labels, data.source_prefix, data.dev, input,
                              cfg_.trainer.batch_size);
    }
    const double f1 = rec.dev.f1();
    if (best.empty() || f1 > result.best_dev_f1) {
      result.best_dev_f1 = f1;
      result.best_epoch = epoch;
      best = snapshot(model_.params());
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (!best.empty()) restore(model_.params(), best);
  return result;
}

std::string format_metrics_line(const EpochRecord& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.epoch << '\t' << r.loss.boundary << '\t' << r.loss.typing << '\t'
     << r.loss.contrastive << '\t' << r.dev.precision() << '\t' << r.dev.recall() << '\t' << r.dev.f1();
  return os.str();
}

void write_metrics_log(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics log " + path.string());
  for (const auto& r : history) out << format_metrics_line(r) << '\n';
}

}  // namespace slotfill
