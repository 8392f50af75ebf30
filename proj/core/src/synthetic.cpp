// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/synthetic.hpp"

#include <fstream>
#include <sstream>

#include "slotfill/rng.hpp"

namespace slotfill {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_count(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw DataError(where + ": bad count '" + v + "'");
  }
}

}  // namespace

SyntheticSpec parse_synthetic_spec(std::string_view text, const std::string& origin) {
  SyntheticSpec spec;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::string>* block = nullptr;
  SyntheticType* cur = nullptr;
  std::vector<bool> has_count;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto hash = raw.find('#');
    std::string line = raw.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const bool indented = line[0] == ' ' || line[0] == '\t';
    if (indented) {
      if (!block) throw DataError(where + ": indented line outside a templates/values block");
      block->push_back(body);
      continue;
    }
    block = nullptr;
    const auto colon = body.find(':');
    if (colon == std::string::npos) throw DataError(where + ": expected key: value");
    const std::string key = trim(body.substr(0, colon));
    const std::string value = trim(body.substr(colon + 1));
    if (key == "type") {
      if (value.empty()) throw DataError(where + ": type needs a name");
      spec.types.push_back(SyntheticType{value, SyntheticRole::kSource, 0, {}, {}});
      has_count.push_back(false);
      cur = &spec.types.back();
    } else if (key == "role") {
      if (!cur) throw DataError(where + ": role before any type");
      if (value == "source") {
        cur->role = SyntheticRole::kSource;
      } else if (value == "target") {
        cur->role = SyntheticRole::kTarget;
      } else if (value == "shared") {
        cur->role = SyntheticRole::kShared;
      } else {
        throw DataError(where + ": role must be source, target or shared");
      }
    } else if (key == "count") {
      const std::size_t n = parse_count(value, where);
      if (cur) {
        cur->count = n;
        has_count.back() = true;
      } else {
        spec.default_count = n;
      }
    } else if (key == "templates") {
      block = cur ? &cur->templates : &spec.default_templates;
    } else if (key == "values") {
      if (!cur) throw DataError(where + ": values before any type");
      block = &cur->values;
    } else if (key == "source_domain" && !cur) {
      spec.source_domain = value;
    } else if (key == "target_domain" && !cur) {
      spec.target_domain = value;
    } else {
      throw DataError(where + ": unknown key '" + key + "'");
    }
    if (block && !value.empty()) block->push_back(value);
  }
  for (std::size_t i = 0; i < spec.types.size(); ++i) {
    if (!has_count[i]) spec.types[i].count = spec.default_count;
    if (spec.types[i].templates.empty()) spec.types[i].templates = spec.default_templates;
  }
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synthetic spec " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_synthetic_spec(ss.str(), path.string());
}

DomainSplit generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  DomainSplit split;
  for (const auto& t : spec.types) {
    if (t.values.empty()) throw DataError("synthetic type '" + t.name + "' has an empty value lexicon");
    if (t.templates.empty()) throw DataError("synthetic type '" + t.name + "' has no templates");
    for (const auto& tpl : t.templates) {
      const auto toks = tokenize(tpl);
      std::size_t slots = 0;
      for (const auto& w : toks) slots += (w == "{slot}");
      if (slots != 1) throw DataError("template '" + tpl + "' of type '" + t.name + "' needs exactly one {slot}");
    }
    split.labels.add(t.name, t.role != SyntheticRole::kTarget, t.role != SyntheticRole::kSource);
  }
  Rng rng(seed);
  for (const auto& t : spec.types) {
    const std::size_t label = *split.labels.index(t.name);
    const auto& cue = split.labels.at(label).tokens;
    for (std::size_t n = 0; n < t.count; ++n) {
      const auto tpl = tokenize(t.templates[rng.index(t.templates.size())]);
      const auto value = tokenize(t.values[rng.index(t.values.size())]);
      AnnotatedUtterance u;
      for (const auto& w : tpl) {
        if (w == "{slot}") {
          for (std::size_t k = 0; k < value.size(); ++k) {
            u.tokens.push_back(value[k]);
            u.y_bd.push_back(k == 0 ? Bio::B : Bio::I);
            u.y_sl.push_back(static_cast<int>(label));
          }
        } else if (w == "{cue}") {
          for (const auto& c : cue) {
            u.tokens.push_back(c);
            u.y_bd.push_back(Bio::O);
            u.y_sl.push_back(-1);
          }
        } else {
          u.tokens.push_back(w);
          u.y_bd.push_back(Bio::O);
          u.y_sl.push_back(-1);
        }
      }
      const bool to_source =
          t.role == SyntheticRole::kSource || (t.role == SyntheticRole::kShared && n % 2 == 0);
      u.domain = to_source ? spec.source_domain : spec.target_domain;
      (to_source ? split.source : split.target).push_back(std::move(u));
    }
  }
  return split;
}

}  // namespace slotfill
