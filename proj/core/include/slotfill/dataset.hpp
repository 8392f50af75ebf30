// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-column BIO corpora, tag decomposition and domain manifests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slotfill/vocab.hpp"

namespace slotfill {

/// Raised for malformed input files. Messages carry file and line.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Boundary tags. The numeric values are the emission indices.
enum class Bio : std::uint8_t { B = 0, I = 1, O = 2 };
inline constexpr std::size_t kNumBio = 3;

char bio_char(Bio b);

/// y_sl entries are indices into the owning LabelVocabulary, or -1 for O.
struct AnnotatedUtterance {
  std::vector<std::string> tokens;
  std::vector<Bio> y_bd;
  std::vector<int> y_sl;
  std::string domain;

  std::size_t size() const { return tokens.size(); }
};

/// Checks the AnnotatedUtterance invariants; returns an empty string when
/// valid, otherwise a description of the first violation.
std::string validate_utterance(const AnnotatedUtterance& u);

/// Splits BIO strings ("B-artist", "I-artist", "O") into boundary tags and
/// label indices. Unknown labels throw DataError unless `grow` is set, in
/// which case they are registered with the given flags.
std::pair<std::vector<Bio>, std::vector<int>> decompose_bio(const std::vector<std::string>& tags,
                                                            LabelVocabulary& labels, bool grow = false,
                                                            bool source = false, bool target = false);
std::pair<std::vector<Bio>, std::vector<int>> decompose_bio(const std::vector<std::string>& tags,
                                                            const LabelVocabulary& labels);
std::vector<std::string> recompose_bio(const std::vector<Bio>& y_bd, const std::vector<int>& y_sl,
                                       const LabelVocabulary& labels);

struct LoadOptions {
  /// Register unseen labels instead of failing.
  bool grow_labels = false;
  bool mark_source = false;
  bool mark_target = false;
};

struct Dataset {
  std::string domain;
  std::vector<AnnotatedUtterance> utterances;
  std::size_t rejected = 0;
  std::vector<std::string> diagnostics;
};

Dataset parse_dataset(std::string_view text, LabelVocabulary& labels, const LoadOptions& opts = {},
                      const std::string& origin = "<memory>");
Dataset load_dataset(const std::filesystem::path& path, LabelVocabulary& labels, const LoadOptions& opts = {});
std::string serialize_dataset(const std::vector<AnnotatedUtterance>& data, const LabelVocabulary& labels,
                              const std::string& domain);
void write_dataset(const std::filesystem::path& path, const std::vector<AnnotatedUtterance>& data,
                   const LabelVocabulary& labels, const std::string& domain);

/// Source data, target data and the label registry. Membership flags on the
/// labels give the source set (labels seen in source tags) and the target set
/// (the manifest's label list).
struct DomainSplit {
  LabelVocabulary labels;
  std::vector<AnnotatedUtterance> source;
  std::vector<AnnotatedUtterance> target;
  /// Optional explicit development data; empty means "hold out from source".
  std::vector<AnnotatedUtterance> dev;
  std::vector<std::string> diagnostics;
};

/// Reads a manifest: `source = file`, `target = file`, optional `dev = file`
/// lines, then `labels:` followed by one target label per line. Relative paths
/// resolve against the manifest's directory.
DomainSplit load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& dir, const DomainSplit& split);

}  // namespace slotfill
