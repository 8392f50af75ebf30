// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat `section.key = value` configuration with a typed key registry.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slotfill/model.hpp"

namespace slotfill {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::size_t max_seq_len = 128;
  double dev_fraction = 0.1;
  std::string manifest;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double encoder_lr = 1e-3;
  double head_lr = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 13;
  bool typing_loss = true;
  std::string checkpoint = "model.ckpt";
  std::string metrics_log = "metrics.tsv";
};

struct EvalConfig {
  std::string report = "report";
  std::string embeddings;
  std::size_t batch_size = 32;
  std::size_t latency_runs = 3;
};

struct Config {
  DataConfig data;
  ModelConfig model;
  TrainConfig trainer;
  EvalConfig eval;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

struct ConfigKeyInfo {
  std::string key;
  std::string type;
  std::string default_value;
  std::string doc;
};

/// Every recognised key with its default and a one-line description.
std::vector<ConfigKeyInfo> config_keys();

/// Sets one key from text. Unknown keys and malformed values throw ConfigError.
void set_config_value(Config& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const Config& cfg, std::string_view key);

/// Applies `key = value` lines (blank lines and # comments ignored).
void apply_config_text(Config& cfg, std::string_view text, const std::string& origin = "<memory>");
/// Defaults, then the file (if non-empty), then `key=value` overrides.
Config load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});

/// Every key in registry order as `key = value` lines; feeding it back
/// reproduces the config exactly.
std::string dump_config(const Config& cfg);
/// Only the keys that shape the model's parameters and inputs.
std::string dump_model_config(const Config& cfg);

/// Markdown reference table of all keys.
std::string config_reference_markdown();

}  // namespace slotfill
