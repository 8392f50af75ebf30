// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace slotfill {

double SpanCounts::precision() const { return predicted ? static_cast<double>(tp) / predicted : 0.0; }
double SpanCounts::recall() const { return gold ? static_cast<double>(tp) / gold : 0.0; }
double SpanCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}
SpanCounts& SpanCounts::operator+=(const SpanCounts& o) {
  tp += o.tp;
  predicted += o.predicted;
  gold += o.gold;
  return *this;
}

namespace {

std::size_t count_matches(const std::vector<SlotSpan>& pred, const std::vector<SlotSpan>& gold) {
  std::vector<bool> used(gold.size(), false);
  std::size_t tp = 0;
  for (const auto& p : pred) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (!used[g] && gold[g] == p) {
        used[g] = true;
        ++tp;
        break;
      }
    }
  }
  return tp;
}

template <typename Pred>
std::vector<SlotSpan> filter(const std::vector<SlotSpan>& v, Pred keep) {
  std::vector<SlotSpan> out;
  for (const auto& s : v)
    if (keep(s)) out.push_back(s);
  return out;
}

std::vector<ModelInput> build_inputs(const Vocabulary& vocab, const LabelVocabulary& labels,
                                     std::span<const std::size_t> prefix, const std::vector<AnnotatedUtterance>& data,
                                     const InputOptions& input) {
  std::vector<ModelInput> inputs;
  inputs.reserve(data.size());
  for (const auto& u : data) inputs.push_back(build_model_input(u, labels, prefix, vocab, input));
  return inputs;
}

}  // namespace

SpanCounts span_f1(const std::vector<SlotSpan>& pred, const std::vector<SlotSpan>& gold) {
  return SpanCounts{count_matches(pred, gold), pred.size(), gold.size()};
}

std::vector<SlotSpan> utterance_gold_spans(const AnnotatedUtterance& utt) { return gold_spans(utt.y_bd, utt.y_sl); }

std::vector<std::vector<SlotSpan>> predict_spans(SlotModel& model, const Vocabulary& vocab,
                                                 const LabelVocabulary& labels, std::span<const std::size_t> prefix,
                                                 const std::vector<AnnotatedUtterance>& data,
                                                 const InputOptions& input, std::size_t batch_size) {
  if (prefix.empty()) throw PreconditionError("predict_spans: empty label set");
  const auto inputs = build_inputs(vocab, labels, prefix, data, input);
  std::vector<std::vector<SlotSpan>> out(data.size());
  for (const Batch& b : make_length_batches(inputs, batch_size)) {
    auto spans = decode(model, b);
    for (std::size_t i = 0; i < b.size; ++i) {
      for (auto& s : spans[i]) s.label = static_cast<int>(prefix[static_cast<std::size_t>(s.label)]);
      out[b.example_index[i]] = std::move(spans[i]);
    }
  }
  return out;
}

SpanCounts score_dataset(SlotModel& model, const Vocabulary& vocab, const LabelVocabulary& labels,
                         std::span<const std::size_t> prefix, const std::vector<AnnotatedUtterance>& data,
                         const InputOptions& input, std::size_t batch_size) {
  const auto pred = predict_spans(model, vocab, labels, prefix, data, input, batch_size);
  SpanCounts c;
  for (std::size_t i = 0; i < data.size(); ++i) c += span_f1(pred[i], utterance_gold_spans(data[i]));
  return c;
}

EvalReport evaluate_zero_shot(SlotModel& model, const Vocabulary& vocab, const LabelVocabulary& labels,
                              std::span<const std::size_t> prefix, const std::vector<AnnotatedUtterance>& data,
                              const InputOptions& input, std::size_t batch_size) {
  if (prefix.empty()) throw PreconditionError("evaluate_zero_shot: empty target label set");
  EvalReport r;
  r.utterances = data.size();
  const auto t0 = std::chrono::steady_clock::now();
  const auto pred = predict_spans(model, vocab, labels, prefix, data, input, batch_size);
  r.decode_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  auto is_seen = [&](const SlotSpan& s) { return labels.at(static_cast<std::size_t>(s.label)).source; };
  auto is_unseen = [&](const SlotSpan& s) { return !is_seen(s); };
  r.per_label.resize(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    r.per_label[k].label = labels.at(k).name;
    r.per_label[k].seen = labels.at(k).source;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto gold = utterance_gold_spans(data[i]);
    const auto& p = pred[i];
    r.overall += span_f1(p, gold);
    r.seen += span_f1(filter(p, is_seen), filter(gold, is_seen));
    r.unseen += span_f1(filter(p, is_unseen), filter(gold, is_unseen));
    if (std::any_of(gold.begin(), gold.end(), is_unseen)) r.unseen_uttr += span_f1(p, gold);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      auto has = [k](const SlotSpan& s) { return static_cast<std::size_t>(s.label) == k; };
      r.per_label[k].counts += span_f1(filter(p, has), filter(gold, has));
    }
  }
  std::erase_if(r.per_label, [](const LabelReport& l) { return l.counts.gold == 0 && l.counts.predicted == 0; });
  return r;
}

namespace {

void tsv_row(std::ostream& os, const std::string& group, const SpanCounts& c) {
  os << group << '\t' << c.tp << '\t' << c.predicted << '\t' << c.gold << '\t' << std::fixed << std::setprecision(6)
     << c.precision() << '\t' << c.recall() << '\t' << c.f1() << '\n';
  os.unsetf(std::ios::floatfield);
}

void kv_block(std::ostream& os, const std::string& prefix, const SpanCounts& c) {
  os << std::setprecision(17);
  os << prefix << ".tp = " << c.tp << '\n'
     << prefix << ".predicted = " << c.predicted << '\n'
     << prefix << ".gold = " << c.gold << '\n'
     << prefix << ".precision = " << c.precision() << '\n'
     << prefix << ".recall = " << c.recall() << '\n'
     << prefix << ".f1 = " << c.f1() << '\n';
}

}  // namespace

std::string report_tsv(const EvalReport& r) {
  std::ostringstream os;
  os << "group\ttp\tpredicted\tgold\tprecision\trecall\tf1\n";
  tsv_row(os, "overall", r.overall);
  tsv_row(os, "seen", r.seen);
  tsv_row(os, "unseen", r.unseen);
  tsv_row(os, "unseen_uttr", r.unseen_uttr);
  for (const auto& l : r.per_label) tsv_row(os, "label:" + l.label, l.counts);
  return os.str();
}

std::string report_kv(const EvalReport& r) {
  std::ostringstream os;
  os << "utterances = " << r.utterances << '\n';
  os << std::setprecision(6) << "decode_seconds = " << r.decode_seconds << '\n';
  kv_block(os, "overall", r.overall);
  kv_block(os, "seen", r.seen);
  kv_block(os, "unseen", r.unseen);
  kv_block(os, "unseen_uttr", r.unseen_uttr);
  for (const auto& l : r.per_label) {
    os << "label." << l.label << ".group = " << (l.seen ? "seen" : "unseen") << '\n';
    kv_block(os, "label." + l.label, l.counts);
  }
  return os.str();
}

void write_report(const std::filesystem::path& stem, const EvalReport& r) {
  for (const auto& [ext, text] : {std::pair{".tsv", report_tsv(r)}, std::pair{".kv", report_kv(r)}}) {
    std::filesystem::path p = stem;
    p += ext;
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write report " + p.string());
    out << text;
  }
}

LabelVocabulary shuffled_label_control(const LabelVocabulary& labels, std::span<const std::size_t> which,
                                       const Vocabulary& vocab, Rng& rng, std::size_t words_per_label) {
  std::set<std::string> label_words;
  for (const auto& l : labels.labels()) label_words.insert(l.tokens.begin(), l.tokens.end());
  std::vector<std::string> pool;
  for (std::size_t i = kNumReserved; i < vocab.size(); ++i) {
    const std::string& w = vocab.token(static_cast<int>(i));
    if (!label_words.count(w)) pool.push_back(w);
  }
  if (pool.size() < words_per_label) throw PreconditionError("shuffled_label_control: vocabulary too small");
  LabelVocabulary out = labels;
  for (std::size_t k : which) {
    std::vector<std::string> words = pool;
    std::vector<std::string> pick;
    for (std::size_t j = 0; j < words_per_label; ++j) {
      const std::size_t r = j + rng.index(words.size() - j);
      std::swap(words[j], words[r]);
      pick.push_back(words[j]);
    }
    out.at(k).tokens = std::move(pick);
  }
  return out;
}

double benchmark_latency(SlotModel& model, std::span<const ModelInput> inputs, std::size_t batch_size,
                         DecodeMode mode) {
  const std::size_t bs = mode == DecodeMode::kBatched ? batch_size : 1;
  const auto batches = make_length_batches(inputs, bs);
  std::size_t sink = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const Batch& b : batches) {
    for (const auto& spans : decode(model, b)) sink += spans.size();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  volatile std::size_t keep = sink;
  (void)keep;
  return secs;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

LatencyResult compare_latency(SlotModel& model, std::span<const ModelInput> inputs, std::size_t batch_size,
                              std::size_t runs) {
  if (runs == 0) throw PreconditionError("compare_latency: runs must be positive");
  LatencyResult r;
  benchmark_latency(model, inputs, batch_size, DecodeMode::kBatched);
  benchmark_latency(model, inputs, batch_size, DecodeMode::kInstance);
  for (std::size_t i = 0; i < runs; ++i) {
    r.batched_runs.push_back(benchmark_latency(model, inputs, batch_size, DecodeMode::kBatched));
    r.instance_runs.push_back(benchmark_latency(model, inputs, batch_size, DecodeMode::kInstance));
  }
  r.batched = median(r.batched_runs);
  r.instance = median(r.instance_runs);
  return r;
}

std::size_t export_entity_embeddings(SlotModel& model, const Vocabulary& vocab, const LabelVocabulary& labels,
                                     std::span<const std::size_t> prefix,
                                     const std::vector<AnnotatedUtterance>& data, const InputOptions& input,
                                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings to " + path.string());
  out << std::setprecision(9);
  const auto inputs = build_inputs(vocab, labels, prefix, data, input);
  std::size_t rows = 0;
  for (const Batch& b : make_length_batches(inputs, 32)) {
    Tape tape(false);
    Rng rng(0);
    const ForwardPass fp = forward(tape, model, b, rng);
    const Tensor& u = fp.u.value();
    for (std::size_t i = 0; i < b.size; ++i) {
      const std::size_t id = b.example_index[i];
      const AnnotatedUtterance& utt = data[id];
      for (std::size_t t = 0; t < utt.size(); ++t) {
        if (utt.y_bd[t] == Bio::O) continue;
        const auto row = u.row_span(fp.offsets[i] + t);
        const double norm = l2_norm(row);
        out << id << '\t' << t << '\t' << labels.at(static_cast<std::size_t>(utt.y_sl[t])).name;
        for (double x : row) out << '\t' << (norm > 0.0 ? x / norm : 0.0);
        out << '\n';
        ++rows;
      }
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return rows;
}

}  // namespace slotfill
