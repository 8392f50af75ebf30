// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace slotfill {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key) + " (expected " + expected + ")");
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return static_cast<std::size_t>(out);
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

template <typename F>
auto wrap_enum(std::string_view key, std::string_view v, F parse) {
  try {
    return parse(v);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

struct Entry {
  const char* key;
  const char* type;
  const char* doc;
  bool model;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, std::string_view)> set;
};

#define SIZE_ENTRY(KEY, FIELD, MODEL, DOC)                                                          \
  Entry {                                                                                           \
    KEY, "int", DOC, MODEL, [](const Config& c) { return std::to_string(c.FIELD); },                \
        [](Config& c, std::string_view v) { c.FIELD = to_size(KEY, v); }                            \
  }
#define DOUBLE_ENTRY(KEY, FIELD, MODEL, DOC)                                                        \
  Entry {                                                                                           \
    KEY, "real", DOC, MODEL, [](const Config& c) { return fmt_double(c.FIELD); },                   \
        [](Config& c, std::string_view v) { c.FIELD = to_double(KEY, v); }                          \
  }
#define BOOL_ENTRY(KEY, FIELD, MODEL, DOC)                                                          \
  Entry {                                                                                           \
    KEY, "bool", DOC, MODEL, [](const Config& c) { return std::string(c.FIELD ? "true" : "false"); }, \
        [](Config& c, std::string_view v) { c.FIELD = to_bool(KEY, v); }                            \
  }
#define STRING_ENTRY(KEY, FIELD, DOC)                                                               \
  Entry {                                                                                           \
    KEY, "string", DOC, false, [](const Config& c) { return c.FIELD; },                             \
        [](Config& c, std::string_view v) { c.FIELD = std::string(v); }                             \
  }
#define ENUM_ENTRY(KEY, FIELD, PARSE, DOC)                                                          \
  Entry {                                                                                           \
    KEY, "enum", DOC, true, [](const Config& c) { return to_string(c.FIELD); },                     \
        [](Config& c, std::string_view v) { c.FIELD = wrap_enum(KEY, v, PARSE); }                   \
  }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      SIZE_ENTRY("data.max_seq_len", data.max_seq_len, true, "Maximum input length including the label prefix"),
      DOUBLE_ENTRY("data.dev_fraction", data.dev_fraction, false,
                   "Share of source data held out for model selection when no dev file is given"),
      STRING_ENTRY("data.manifest", data.manifest, "Domain manifest path"),
      SIZE_ENTRY("encoder.layers", model.encoder.layers, true, "Transformer blocks"),
      SIZE_ENTRY("encoder.heads", model.encoder.heads, true, "Attention heads; must divide d_model"),
      SIZE_ENTRY("encoder.d_model", model.encoder.d_model, true, "Model width"),
      SIZE_ENTRY("encoder.d_ff", model.encoder.d_ff, true, "Feed-forward width"),
      DOUBLE_ENTRY("encoder.dropout", model.encoder.dropout, false, "Embedding and residual dropout rate"),
      SIZE_ENTRY("encoder.max_positions", model.encoder.max_positions, true, "Rows of the position table"),
      ENUM_ENTRY("encoder.interaction", model.encoder.interaction, parse_interaction_policy,
                 "full | no-label-to-utterance | no-utterance-to-label | no-bidirectional | no-label-to-label"),
      ENUM_ENTRY("encoder.label_mode", model.encoder.label_mode, parse_label_mode, "context-aware | decoupled"),
      ENUM_ENTRY("encoder.positions", model.encoder.positions, parse_position_mode,
                 "span (each label span and the utterance count from 0) | continuous"),
      DOUBLE_ENTRY("encoder.token_dropout", model.encoder.token_dropout, false,
                   "Probability of replacing an utterance token by <unk> while training"),
      BOOL_ENTRY("encoder.freeze_label_path", model.encoder.freeze_label_path, true,
                 "Block gradients into the encoder through the label embeddings"),
      SIZE_ENTRY("boundary.hidden", model.boundary.hidden, true, "LSTM hidden size per direction"),
      SIZE_ENTRY("typing.boundary_dim", model.typing.boundary_dim, true, "Boundary embedding width"),
      SIZE_ENTRY("typing.bottleneck", model.typing.bottleneck, true, "Adapter bottleneck width; 0 means d_model / 2"),
      BOOL_ENTRY("typing.adapter_residual", model.typing.adapter_residual, true, "Add the label matrix back after the adapter"),
      ENUM_ENTRY("typing.span_scoring", model.typing.span_scoring, parse_span_scoring, "mean | first"),
      BOOL_ENTRY("contrastive.enabled", model.contrastive.enabled, false, "Include the slot contrastive loss"),
      ENUM_ENTRY("contrastive.metric", model.contrastive.metric, parse_metric, "cosine | mse | smooth-l1 | kl"),
      DOUBLE_ENTRY("contrastive.tau", model.contrastive.tau, false, "Temperature, > 0"),
      SIZE_ENTRY("contrastive.projection_dim", model.contrastive.projection_dim, true, "Projection head width"),
      BOOL_ENTRY("contrastive.per_anchor", model.contrastive.per_anchor, false,
                 "Average the loss per anchor instead of over the whole pair set"),
      SIZE_ENTRY("trainer.epochs", trainer.epochs, false, "Training epochs"),
      SIZE_ENTRY("trainer.batch_size", trainer.batch_size, false, "Mini-batch size"),
      DOUBLE_ENTRY("trainer.encoder_lr", trainer.encoder_lr, false, "AdamW rate for encoder parameters"),
      DOUBLE_ENTRY("trainer.head_lr", trainer.head_lr, false, "AdamW rate for all other parameters"),
      DOUBLE_ENTRY("trainer.weight_decay", trainer.weight_decay, false, "Decoupled weight decay"),
      Entry{"trainer.seed", "int", "Seed for initialization, shuffling, dropout and the dev split", false,
            [](const Config& c) { return std::to_string(c.trainer.seed); },
            [](Config& c, std::string_view v) { c.trainer.seed = to_u64("trainer.seed", v); }},
      BOOL_ENTRY("trainer.typing_loss", trainer.typing_loss, false, "Include the typing loss"),
      STRING_ENTRY("trainer.checkpoint", trainer.checkpoint, "Checkpoint output path"),
      STRING_ENTRY("trainer.metrics_log", trainer.metrics_log, "Per-epoch metrics log path"),
      STRING_ENTRY("eval.report", eval.report, "Report path prefix (.tsv and .kv are appended)"),
      STRING_ENTRY("eval.embeddings", eval.embeddings, "Slot-entity embedding export path; empty disables"),
      SIZE_ENTRY("eval.batch_size", eval.batch_size, false, "Decode batch size"),
      SIZE_ENTRY("eval.latency_runs", eval.latency_runs, false, "Timed repetitions per latency mode"),
  };
  return entries;
}

const Entry* find_entry(std::string_view key) {
  for (const auto& e : registry())
    if (key == e.key) return &e;
  return nullptr;
}

}  // namespace

void Config::validate() const {
  try {
    model.encoder.validate();
    model.contrastive.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  if (trainer.epochs == 0) throw ConfigError("trainer.epochs must be at least 1");
  if (trainer.batch_size == 0) throw ConfigError("trainer.batch_size must be at least 1");
  if (eval.batch_size == 0) throw ConfigError("eval.batch_size must be at least 1");
  if (trainer.encoder_lr < 0.0 || trainer.head_lr < 0.0) throw ConfigError("learning rates must be non-negative");
  if (!(data.dev_fraction >= 0.0 && data.dev_fraction < 1.0)) throw ConfigError("data.dev_fraction must lie in [0, 1)");
  if (model.boundary.hidden == 0) throw ConfigError("boundary.hidden must be positive");
  if (model.typing.boundary_dim == 0) throw ConfigError("typing.boundary_dim must be positive");
}

std::vector<ConfigKeyInfo> config_keys() {
  const Config defaults;
  std::vector<ConfigKeyInfo> out;
  for (const auto& e : registry()) out.push_back({e.key, e.type, e.get(defaults), e.doc});
  return out;
}

void set_config_value(Config& cfg, std::string_view key, std::string_view value) {
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError("unknown config key '" + std::string(key) + "'");
  e->set(cfg, trim(value));
}

std::string get_config_value(const Config& cfg, std::string_view key) {
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return e->get(cfg);
}

void apply_config_text(Config& cfg, std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(no) + ": expected key = value");
    try {
      set_config_value(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& err) {
      throw ConfigError(origin + ":" + std::to_string(no) + ": " + err.what());
    }
  }
}

Config load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  Config cfg;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str(), file.string());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    set_config_value(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  return cfg;
}

std::string dump_config(const Config& cfg) {
  std::ostringstream os;
  for (const auto& e : registry()) os << e.key << " = " << e.get(cfg) << '\n';
  return os.str();
}

std::string dump_model_config(const Config& cfg) {
  std::ostringstream os;
  for (const auto& e : registry()) {
    if (e.model) os << e.key << " = " << e.get(cfg) << '\n';
  }
  return os.str();
}

std::string config_reference_markdown() {
  std::ostringstream os;
  os << "# Configuration reference\n\n"
     << "Config files hold `section.key = value` lines; `#` starts a comment. "
     << "`--set key=value` overrides win over the file. `train --dump-config` prints the resolved values.\n\n"
     << "| key | type | default | description |\n|---|---|---|---|\n";
  for (const auto& k : config_keys()) {
    std::string doc;
    for (char c : k.doc) {
      if (c == '|' || c == '<' || c == '>') doc += '\\';
      doc += c;
    }
    os << "| `" << k.key << "` | " << k.type << " | `" << (k.default_value.empty() ? "\"\"" : k.default_value) << "` | "
       << doc << " |\n";
  }
  return os.str();
}

}  // namespace slotfill
