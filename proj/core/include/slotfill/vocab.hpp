// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace slotfill {

inline constexpr int kStartId = 0;
inline constexpr int kPadId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kNumReserved = 3;

/// Lowercased whitespace tokenization.
std::vector<std::string> tokenize(std::string_view text);
/// Label names split on whitespace and underscores, lowercased:
/// "departure_city" -> {"departure", "city"}.
std::vector<std::string> tokenize_label(std::string_view name);
std::string to_lower(std::string_view s);

/// Word vocabulary. Ids 0..2 are the start marker, padding and unknown.
class Vocabulary {
 public:
  Vocabulary();

  /// Adds the lowercased token if absent; returns its id.
  int add(std::string_view token);
  /// Id of the lowercased token, or kUnkId.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t hash() const;

  /// Vocabulary over the sorted union of `words`.
  static Vocabulary from_words(std::vector<std::string> words);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct SlotLabel {
  std::string name;
  std::vector<std::string> tokens;
  bool source = false;
  bool target = false;
};

/// Ordered registry of slot labels with source/target membership flags.
class LabelVocabulary {
 public:
  /// Adds a label or merges the flags into an existing one. Returns its index.
  std::size_t add(std::string_view name, bool source, bool target);
  std::optional<std::size_t> index(std::string_view name) const;
  const SlotLabel& at(std::size_t i) const { return labels_.at(i); }
  SlotLabel& at(std::size_t i) { return labels_.at(i); }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::vector<SlotLabel>& labels() const { return labels_; }

  std::vector<std::size_t> source_indices() const;
  std::vector<std::size_t> target_indices() const;
  std::vector<std::size_t> shared_indices() const;
  std::uint64_t hash() const;

 private:
  std::vector<SlotLabel> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace slotfill
