// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/synthetic.hpp"

#include <gtest/gtest.h>

#include <set>
#include <string>

namespace slotfill {
namespace {

std::string six_type_spec() {
  std::string s = "count: 200\ntemplates:\n  please set the {cue} to {slot}\n  {slot} is the {cue}\n";
  const char* names[] = {"from_city", "to_city", "depart_time", "arrive_time", "seat_class", "meal_kind"};
  for (int i = 0; i < 6; ++i) {
    s += std::string("type: ") + names[i] + "\nrole: " + (i < 4 ? "source" : "target") + "\nvalues:\n";
    for (int v = 0; v < 5; ++v) s += "  value" + std::to_string(i) + " w" + std::to_string(v) + "\n";
  }
  return s;
}

std::string serialize(const DomainSplit& d) {
  return serialize_dataset(d.source, d.labels, "s") + serialize_dataset(d.target, d.labels, "t");
}

TEST(Synthetic, CountsAndDeterminism) {
  const SyntheticSpec spec = parse_synthetic_spec(six_type_spec());
  ASSERT_EQ(spec.types.size(), 6u);
  const DomainSplit a = generate_synthetic(spec, 7);
  const DomainSplit b = generate_synthetic(spec, 7);
  EXPECT_EQ(a.source.size() + a.target.size(), 1200u);
  EXPECT_EQ(serialize(a), serialize(b));
  EXPECT_NE(serialize(a), serialize(generate_synthetic(spec, 8)));
  for (const auto& u : a.source) EXPECT_TRUE(validate_utterance(u).empty());
}

TEST(Synthetic, TargetOnlyTypesNeverInSource) {
  const DomainSplit d = generate_synthetic(parse_synthetic_spec(six_type_spec()), 7);
  std::set<int> source_labels, target_labels;
  for (const auto& u : d.source)
    for (int l : u.y_sl)
      if (l >= 0) source_labels.insert(l);
  for (const auto& u : d.target)
    for (int l : u.y_sl)
      if (l >= 0) target_labels.insert(l);
  for (int l : target_labels) {
    EXPECT_EQ(source_labels.count(l), 0u) << d.labels.at(static_cast<std::size_t>(l)).name;
    EXPECT_TRUE(d.labels.at(static_cast<std::size_t>(l)).target);
    EXPECT_FALSE(d.labels.at(static_cast<std::size_t>(l)).source);
  }
  EXPECT_EQ(source_labels.size(), 4u);
  EXPECT_EQ(target_labels.size(), 2u);
}

TEST(Synthetic, EmptyLexiconRejected) {
  const std::string bad = "templates:\n  {slot} {cue}\ntype: empty_one\nrole: source\nvalues:\n";
  EXPECT_THROW(generate_synthetic(parse_synthetic_spec(bad), 1), DataError);
  const std::string no_slot = "templates:\n  no slot here\ntype: x\nrole: source\nvalues:\n  v\n";
  EXPECT_THROW(generate_synthetic(parse_synthetic_spec(no_slot), 1), DataError);
}

TEST(Synthetic, BundledFlightsSpecLoads) {
  const SyntheticSpec spec = load_synthetic_spec(std::string(SLOTFILL_DATA_DIR) + "/flights.spec");
  const DomainSplit d = generate_synthetic(spec, 0);
  EXPECT_FALSE(d.source.empty());
  EXPECT_FALSE(d.target.empty());
  EXPECT_EQ(d.labels.source_indices().size(), 4u);
  EXPECT_EQ(d.labels.target_indices().size(), 2u);
}

}  // namespace
}  // namespace slotfill
