// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "slotfill/checkpoint.hpp"
#include "slotfill/config.hpp"
#include "slotfill/evaluation.hpp"
#include "slotfill/synthetic.hpp"
#include "slotfill/trainer.hpp"

namespace slotfill::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch_size;
  std::optional<double> tau;
  std::optional<std::string> metric;
  std::optional<std::string> interaction_policy;
  std::optional<std::string> label_mode;
  bool no_contrastive = false;
  bool dump_config = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Config file of `section.key = value` lines");
  cmd->add_option("--set", o.overrides, "Override one key, as key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Random seed (trainer.seed)");
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size (trainer.batch_size)");
  cmd->add_option("--tau", o.tau, "Contrastive temperature (contrastive.tau)");
  cmd->add_option("--metric", o.metric, "Contrastive metric (contrastive.metric)");
  cmd->add_option("--interaction-policy", o.interaction_policy, "Attention policy (encoder.interaction)");
  cmd->add_option("--label-mode", o.label_mode, "Label embedding mode (encoder.label_mode)");
  cmd->add_flag("--no-contrastive", o.no_contrastive, "Disable the slot contrastive loss");
  cmd->add_flag("--dump-config", o.dump_config, "Print the resolved config and exit");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Base text (file or checkpoint), then --set, then first-class flags.
Config resolve_config(const CommonOptions& o, const std::string& base_text) {
  std::vector<std::string> sets = o.overrides;
  if (o.seed) sets.push_back("trainer.seed=" + std::to_string(*o.seed));
  if (o.batch_size) {
    sets.push_back("trainer.batch_size=" + std::to_string(*o.batch_size));
    sets.push_back("eval.batch_size=" + std::to_string(*o.batch_size));
  }
  if (o.tau) sets.push_back("contrastive.tau=" + fmt(*o.tau));
  if (o.metric) sets.push_back("contrastive.metric=" + *o.metric);
  if (o.interaction_policy) sets.push_back("encoder.interaction=" + *o.interaction_policy);
  if (o.label_mode) sets.push_back("encoder.label_mode=" + *o.label_mode);
  if (o.no_contrastive) sets.push_back("contrastive.enabled=false");
  Config cfg;
  if (!o.config_path.empty()) {
    cfg = load_config(o.config_path, {});
  } else if (!base_text.empty()) {
    apply_config_text(cfg, base_text, "<checkpoint>");
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + s + "' is not key=value");
    set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

InputOptions input_options(const Config& cfg) { return InputOptions{cfg.data.max_seq_len, cfg.model.encoder.positions}; }

struct LoadedModel {
  Config cfg;
  Checkpoint ckpt;
  std::unique_ptr<SlotModel> model;
};

/// Reads a checkpoint and rebuilds its model; the resolved config must
/// reproduce the stored fingerprint.
LoadedModel load_model(const std::string& path, const CommonOptions& o, const Vocabulary& vocab,
                       const LabelVocabulary& labels) {
  LoadedModel lm;
  lm.ckpt = read_checkpoint(path);
  lm.cfg = o.config_path.empty() ? resolve_config(o, lm.ckpt.meta.config_text) : resolve_config(o, "");
  verify_fingerprint(lm.ckpt, checkpoint_fingerprint(lm.cfg, vocab, labels));
  lm.model = std::make_unique<SlotModel>(lm.cfg.model, vocab.size(), lm.cfg.trainer.seed);
  restore_parameters(lm.model->params(), lm.ckpt);
  return lm;
}

Vocabulary stored_vocabulary(const CheckpointMeta& m) {
  std::vector<std::string> words;
  for (std::size_t i = kNumReserved; i < m.vocab.size(); ++i) words.push_back(m.vocab[i]);
  Vocabulary v = Vocabulary::from_words(words);
  if (v.hash() != m.vocab_hash) throw CheckpointError("checkpoint vocabulary does not match its recorded hash");
  return v;
}

LabelVocabulary stored_labels(const CheckpointMeta& m) {
  LabelVocabulary l;
  for (std::size_t i = 0; i < m.label_names.size(); ++i) l.add(m.label_names[i], m.label_source[i], m.label_target[i]);
  return l;
}

std::string manifest_path(const std::string& flag, const Config& cfg) {
  const std::string p = flag.empty() ? cfg.data.manifest : flag;
  if (p.empty()) throw UsageError("no manifest given (use --manifest or data.manifest)");
  return p;
}

void print_diagnostics(const std::vector<std::string>& diags, std::ostream& err) {
  for (const auto& d : diags) err << "warning: " << d << '\n';
}

int cmd_train(const CommonOptions& o, const std::string& manifest_flag, const std::string& ckpt_flag,
              const std::string& log_flag, std::ostream& out, std::ostream& err) {
  Config cfg = resolve_config(o, "");
  if (!manifest_flag.empty()) cfg.data.manifest = manifest_flag;
  if (!ckpt_flag.empty()) cfg.trainer.checkpoint = ckpt_flag;
  if (!log_flag.empty()) cfg.trainer.metrics_log = log_flag;
  if (o.dump_config) {
    out << dump_config(cfg);
    return kExitOk;
  }
  const DomainSplit split = load_manifest(manifest_path("", cfg));
  print_diagnostics(split.diagnostics, err);
  const PreparedData data = prepare_data(split, cfg.data.dev_fraction, cfg.trainer.seed);
  SlotModel model(cfg.model, data.vocab.size(), cfg.trainer.seed);
  Trainer trainer(model, cfg);
  const FitResult res = trainer.fit(data, [&](const EpochRecord& r) { err << format_metrics_line(r) << '\n'; });
  write_metrics_log(cfg.trainer.metrics_log, res.history);
  save_checkpoint(cfg.trainer.checkpoint, model.params(), make_checkpoint_meta(cfg, data.vocab, data.labels),
                  checkpoint_fingerprint(cfg, data.vocab, data.labels));
  out << "best_epoch = " << res.best_epoch << "\nbest_dev_f1 = " << fmt(res.best_dev_f1)
      << "\ncheckpoint = " << cfg.trainer.checkpoint << "\nmetrics_log = " << cfg.trainer.metrics_log << '\n';
  return kExitOk;
}

int cmd_eval(const CommonOptions& o, const std::string& manifest_flag, const std::string& ckpt, std::string report,
             std::string embeddings, std::ostream& out, std::ostream& err) {
  if (ckpt.empty()) throw UsageError("eval needs --checkpoint");
  const Checkpoint peek = read_checkpoint(ckpt);
  Config base;
  apply_config_text(base, peek.meta.config_text, ckpt);
  const DomainSplit split = load_manifest(manifest_path(manifest_flag, base));
  print_diagnostics(split.diagnostics, err);
  const Vocabulary vocab = build_vocabulary(split.source, split.labels);
  LoadedModel lm = load_model(ckpt, o, vocab, split.labels);
  if (o.dump_config) {
    out << dump_config(lm.cfg);
    return kExitOk;
  }
  const auto prefix = split.labels.target_indices();
  if (prefix.empty()) throw DataError("manifest has no target labels");
  const EvalReport rep = evaluate_zero_shot(*lm.model, vocab, split.labels, prefix, split.target, input_options(lm.cfg),
                                            lm.cfg.eval.batch_size);
  if (report.empty()) report = lm.cfg.eval.report;
  if (embeddings.empty()) embeddings = lm.cfg.eval.embeddings;
  write_report(report, rep);
  if (!embeddings.empty()) {
    export_entity_embeddings(*lm.model, vocab, split.labels, prefix, split.target, input_options(lm.cfg), embeddings);
  }
  out << report_tsv(rep);
  return kExitOk;
}

std::vector<std::string> split_labels(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_predict(const CommonOptions& o, const std::string& ckpt, const std::string& labels_arg,
                const std::string& input_path, std::istream& in, std::ostream& out) {
  if (ckpt.empty()) throw UsageError("predict needs --checkpoint");
  const auto names = split_labels(labels_arg);
  if (names.empty()) throw UsageError("predict needs --labels a,b,...");
  const Checkpoint peek = read_checkpoint(ckpt);
  const Vocabulary vocab = stored_vocabulary(peek.meta);
  LoadedModel lm = load_model(ckpt, o, vocab, stored_labels(peek.meta));
  LabelVocabulary labels;
  for (const auto& n : names) labels.add(n, false, true);
  std::vector<std::size_t> prefix(labels.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) prefix[i] = i;

  std::ifstream file;
  if (!input_path.empty() && input_path != "-") {
    file.open(input_path);
    if (!file) throw DataError("cannot open " + input_path);
  }
  std::istream& src = file.is_open() ? file : in;
  std::vector<AnnotatedUtterance> utts;
  std::string line;
  while (std::getline(src, line)) {
    AnnotatedUtterance u;
    u.tokens = tokenize(line);
    if (u.tokens.empty()) continue;
    u.y_bd.assign(u.tokens.size(), Bio::O);
    u.y_sl.assign(u.tokens.size(), -1);
    utts.push_back(std::move(u));
  }
  const auto pred = predict_spans(*lm.model, vocab, labels, prefix, utts, input_options(lm.cfg), lm.cfg.eval.batch_size);
  for (const auto& spans : pred) {
    for (const auto& s : spans) out << s.start << ':' << s.end << ':' << labels.at(static_cast<std::size_t>(s.label)).name << '\n';
    out << '\n';
  }
  return kExitOk;
}

int cmd_benchmark(const CommonOptions& o, const std::string& manifest_flag, const std::string& ckpt,
                  std::size_t min_utterances, std::size_t runs, std::ostream& out, std::ostream& err) {
  Config cfg = resolve_config(o, "");
  std::string mpath = manifest_flag;
  std::optional<Checkpoint> peek;
  if (!ckpt.empty()) {
    peek = read_checkpoint(ckpt);
    if (o.config_path.empty()) {
      Config base;
      apply_config_text(base, peek->meta.config_text, ckpt);
      if (mpath.empty()) mpath = base.data.manifest;
    }
  }
  const DomainSplit split = load_manifest(manifest_path(mpath, cfg));
  print_diagnostics(split.diagnostics, err);
  const Vocabulary vocab = build_vocabulary(split.source, split.labels);
  std::unique_ptr<SlotModel> model;
  if (peek) {
    LoadedModel lm = load_model(ckpt, o, vocab, split.labels);
    cfg = lm.cfg;
    model = std::move(lm.model);
  } else {
    model = std::make_unique<SlotModel>(cfg.model, vocab.size(), cfg.trainer.seed);
  }
  std::vector<AnnotatedUtterance> pool = split.target.empty() ? split.source : split.target;
  if (pool.empty()) throw DataError("manifest has no utterances to decode");
  auto prefix = split.labels.target_indices();
  if (prefix.empty()) prefix = split.labels.source_indices();
  std::vector<ModelInput> inputs;
  const InputOptions io = input_options(cfg);
  for (std::size_t i = 0; inputs.size() < std::max(min_utterances, pool.size()); ++i) {
    inputs.push_back(build_model_input(pool[i % pool.size()], split.labels, prefix, vocab, io));
  }
  const LatencyResult r = compare_latency(*model, inputs, cfg.eval.batch_size, runs);
  out << "utterances = " << inputs.size() << "\nbatch_size = " << cfg.eval.batch_size << "\nbatched_seconds = "
      << fmt(r.batched) << "\ninstance_seconds = " << fmt(r.instance) << "\nspeedup = " << fmt(r.speedup()) << '\n';
  return kExitOk;
}

int cmd_gen_synth(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed, std::ostream& out) {
  if (spec_path.empty() || out_dir.empty()) throw UsageError("gen-synth needs --spec and --out");
  const DomainSplit split = generate_synthetic(load_synthetic_spec(spec_path), seed);
  std::filesystem::create_directories(out_dir);
  write_manifest(out_dir, split);
  out << "source = " << split.source.size() << "\ntarget = " << split.target.size()
      << "\nmanifest = " << (std::filesystem::path(out_dir) / "manifest.txt").string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot slot filling: training, evaluation and decoding", "slotfill"};
  app.require_subcommand(1, 1);

  CommonOptions common;
  std::string manifest, checkpoint, metrics_log, report, embeddings, labels, input, spec, out_dir;
  std::size_t min_utterances = 1000, runs = 3;
  std::uint64_t synth_seed = 0;

  CLI::App* train = app.add_subcommand("train", "Train on the source domain of a manifest");
  add_common(train, common);
  train->add_option("--manifest", manifest, "Domain manifest");
  train->add_option("--checkpoint", checkpoint, "Checkpoint output path");
  train->add_option("--metrics-log", metrics_log, "Metrics log output path");

  CLI::App* eval = app.add_subcommand("eval", "Zero-shot evaluation on the target domain");
  add_common(eval, common);
  eval->add_option("--manifest", manifest, "Domain manifest");
  eval->add_option("--checkpoint", checkpoint, "Trained checkpoint");
  eval->add_option("--report", report, "Report path prefix");
  eval->add_option("--embeddings", embeddings, "Slot-entity embedding export path");

  CLI::App* predict = app.add_subcommand("predict", "Tag plain utterances, one per input line");
  add_common(predict, common);
  predict->add_option("--checkpoint", checkpoint, "Trained checkpoint");
  predict->add_option("--labels", labels, "Comma-separated label names");
  predict->add_option("--input", input, "Utterance file; stdin when omitted or '-'");

  CLI::App* bench = app.add_subcommand("benchmark", "Batched versus instance-wise decode latency");
  add_common(bench, common);
  bench->add_option("--manifest", manifest, "Domain manifest");
  bench->add_option("--checkpoint", checkpoint, "Trained checkpoint; fresh weights when omitted");
  bench->add_option("--utterances", min_utterances, "Minimum number of utterances to decode");
  bench->add_option("--runs", runs, "Timed runs per mode; the median is reported");

  CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic source/target corpus");
  gen->add_option("--spec", spec, "Synthetic corpus spec");
  gen->add_option("--out", out_dir, "Output directory");
  gen->add_option("--seed", synth_seed, "Generator seed");

  CLI::App* reference = app.add_subcommand("config-reference", "Print every configuration key as a Markdown table");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(common, manifest, checkpoint, metrics_log, out, err);
    if (*eval) return cmd_eval(common, manifest, checkpoint, report, embeddings, out, err);
    if (*predict) return cmd_predict(common, checkpoint, labels, input, in, out);
    if (*bench) return cmd_benchmark(common, manifest, checkpoint, min_utterances, runs, out, err);
    if (*gen) return cmd_gen_synth(spec, out_dir, synth_seed, out);
    if (*reference) {
      out << config_reference_markdown();
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cin, std::cout, std::cerr);
}

}  // namespace slotfill::cli
