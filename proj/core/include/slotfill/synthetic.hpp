// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Template-based synthetic corpora for small zero-shot experiments.
//
// Spec file layout (indentation marks block members):
//
//   count: 200                 # default utterances per type
//   templates:                 # default templates for types without their own
//     please set the {cue} to {slot}
//   type: departure_city
//   role: source               # source | target | shared
//   count: 250                 # optional
//   values:
//     paris
//     new york
//
// `{slot}` is replaced by a sampled value (tagged B/I with the type) and
// `{cue}` by the words of the type's name.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "slotfill/dataset.hpp"

namespace slotfill {

enum class SyntheticRole : std::uint8_t { kSource, kTarget, kShared };

struct SyntheticType {
  std::string name;
  SyntheticRole role = SyntheticRole::kSource;
  std::size_t count = 0;
  std::vector<std::string> templates;
  std::vector<std::string> values;
};

struct SyntheticSpec {
  std::size_t default_count = 100;
  std::string source_domain = "synthetic-source";
  std::string target_domain = "synthetic-target";
  std::vector<std::string> default_templates;
  std::vector<SyntheticType> types;
};

SyntheticSpec parse_synthetic_spec(std::string_view text, const std::string& origin = "<memory>");
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// Samples `count` utterances per type. Source types go to the source set,
/// target types to the target set, shared types alternate between the two.
/// Throws DataError for a type without values or templates, or a template
/// without exactly one {slot}.
DomainSplit generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace slotfill
