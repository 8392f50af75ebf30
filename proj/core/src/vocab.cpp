// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "slotfill/hash.hpp"
#include "slotfill/tensor.hpp"

namespace slotfill {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

std::vector<std::string> split_on(std::string_view text, bool underscore) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const bool sep = std::isspace(static_cast<unsigned char>(c)) || (underscore && c == '_');
    if (sep) {
      if (!cur.empty()) out.push_back(to_lower(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(to_lower(cur));
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) { return split_on(text, false); }
std::vector<std::string> tokenize_label(std::string_view name) { return split_on(name, true); }

Vocabulary::Vocabulary() {
  for (const char* t : {"<s>", "<pad>", "<unk>"}) {
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

int Vocabulary::add(std::string_view token) {
  std::string key = to_lower(token);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  index_.emplace(key, id);
  tokens_.push_back(std::move(key));
  return id;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(to_lower(token));
  if (it == index_.end() || it->second < kNumReserved) return kUnkId;
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const { return id(token) != kUnkId; }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw PreconditionError("vocabulary id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  return h;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  for (auto& w : words) w = to_lower(w);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

std::size_t LabelVocabulary::add(std::string_view name, bool source, bool target) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) {
    labels_[it->second].source = labels_[it->second].source || source;
    labels_[it->second].target = labels_[it->second].target || target;
    return it->second;
  }
  SlotLabel l;
  l.name = std::string(name);
  l.tokens = tokenize_label(name);
  if (l.tokens.empty()) throw PreconditionError("label name '" + l.name + "' has no tokens");
  l.source = source;
  l.target = target;
  index_.emplace(l.name, labels_.size());
  labels_.push_back(std::move(l));
  return labels_.size() - 1;
}

std::optional<std::size_t> LabelVocabulary::index(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> LabelVocabulary::source_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i].source) out.push_back(i);
  return out;
}

std::vector<std::size_t> LabelVocabulary::target_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i].target) out.push_back(i);
  return out;
}

std::vector<std::size_t> LabelVocabulary::shared_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i].source && labels_[i].target) out.push_back(i);
  return out;
}

std::uint64_t LabelVocabulary::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& l : labels_) {
    h = fnv1a(l.name, h);
    const char flags[2] = {static_cast<char>(l.source ? '1' : '0'), static_cast<char>(l.target ? '1' : '0')};
    h = fnv1a_bytes(flags, 2, h);
  }
  return h;
}

}  // namespace slotfill
