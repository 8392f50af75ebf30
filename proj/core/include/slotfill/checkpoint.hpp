// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoints.
//
// Layout (little-endian):
//   "SLTF" | u32 version | u64 fingerprint
//   u64 metadata length | metadata bytes
//   u32 tensor count | per tensor: u32 name length, name, u8 dtype (1 = f64),
//     u32 rank, u64 dims[rank], u64 payload offset, u64 byte count,
//     u64 FNV-1a checksum
//   payload

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "slotfill/autodiff.hpp"

namespace slotfill {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything besides the weights needed to rebuild and use a model.
struct CheckpointMeta {
  std::string config_text;
  std::vector<std::string> vocab;
  /// Label registry, one entry per label: name, in-source flag, in-target flag.
  std::vector<std::string> label_names;
  std::vector<std::uint8_t> label_source;
  std::vector<std::uint8_t> label_target;
  std::uint64_t vocab_hash = 0;
  std::uint64_t label_hash = 0;
};

/// Hash of the model-shaping config text and the vocabulary/label hashes.
std::uint64_t config_fingerprint(const std::string& model_config_text, std::uint64_t vocab_hash,
                                 std::uint64_t label_hash);

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t fingerprint = 0;
  CheckpointMeta meta;
  std::vector<NamedTensor> tensors;
};

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params, const CheckpointMeta& meta,
                     std::uint64_t fingerprint);

/// Parses and verifies a checkpoint. Throws CheckpointError on a bad magic or
/// version, truncation, duplicate names or a checksum mismatch (the message
/// names the tensor and its payload offset).
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError unless the stored fingerprint equals `expected`.
void verify_fingerprint(const Checkpoint& ckpt, std::uint64_t expected);

/// Copies tensors into `params`; every parameter must appear exactly once with
/// a matching shape.
void restore_parameters(ParameterStore& params, const Checkpoint& ckpt);

}  // namespace slotfill
