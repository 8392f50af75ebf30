// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/dataset.hpp"

#include <fstream>
#include <sstream>

#include "slotfill/tensor.hpp"

namespace slotfill {

namespace fs = std::filesystem;

char bio_char(Bio b) {
  switch (b) {
    case Bio::B: return 'B';
    case Bio::I: return 'I';
    case Bio::O: return 'O';
  }
  return '?';
}

std::string validate_utterance(const AnnotatedUtterance& u) {
  if (u.tokens.size() != u.y_bd.size() || u.tokens.size() != u.y_sl.size()) return "length mismatch";
  for (std::size_t i = 0; i < u.size(); ++i) {
    const bool is_o = u.y_bd[i] == Bio::O;
    if (is_o != (u.y_sl[i] < 0)) return "label presence disagrees with tag at token " + std::to_string(i);
    if (u.y_bd[i] == Bio::I) {
      if (i == 0 || u.y_bd[i - 1] == Bio::O) return "I without a preceding B at token " + std::to_string(i);
      if (u.y_sl[i - 1] != u.y_sl[i]) return "I continues a different label at token " + std::to_string(i);
    }
  }
  return {};
}

namespace {

struct ParsedTag {
  Bio bio = Bio::O;
  std::string label;
};

bool parse_tag(std::string_view tag, ParsedTag& out) {
  if (tag == "O") {
    out.bio = Bio::O;
    out.label.clear();
    return true;
  }
  if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) return false;
  out.bio = tag[0] == 'B' ? Bio::B : Bio::I;
  out.label = std::string(tag.substr(2));
  return true;
}

std::pair<std::vector<Bio>, std::vector<int>> decompose_impl(const std::vector<std::string>& tags,
                                                             LabelVocabulary* grow_into,
                                                             const LabelVocabulary& labels, bool source,
                                                             bool target) {
  std::vector<Bio> y_bd;
  std::vector<int> y_sl;
  y_bd.reserve(tags.size());
  y_sl.reserve(tags.size());
  ParsedTag pt;
  for (const auto& tag : tags) {
    if (!parse_tag(tag, pt)) throw DataError("unknown tag '" + tag + "'");
    y_bd.push_back(pt.bio);
    if (pt.bio == Bio::O) {
      y_sl.push_back(-1);
      continue;
    }
    auto idx = labels.index(pt.label);
    if (!idx) {
      if (!grow_into) throw DataError("label '" + pt.label + "' is not in the label vocabulary");
      idx = grow_into->add(pt.label, source, target);
    } else if (grow_into) {
      grow_into->add(pt.label, source, target);
    }
    y_sl.push_back(static_cast<int>(*idx));
  }
  return {std::move(y_bd), std::move(y_sl)};
}

}  // namespace

std::pair<std::vector<Bio>, std::vector<int>> decompose_bio(const std::vector<std::string>& tags,
                                                            LabelVocabulary& labels, bool grow, bool source,
                                                            bool target) {
  return decompose_impl(tags, grow ? &labels : nullptr, labels, source, target);
}

std::pair<std::vector<Bio>, std::vector<int>> decompose_bio(const std::vector<std::string>& tags,
                                                            const LabelVocabulary& labels) {
  return decompose_impl(tags, nullptr, labels, false, false);
}

std::vector<std::string> recompose_bio(const std::vector<Bio>& y_bd, const std::vector<int>& y_sl,
                                       const LabelVocabulary& labels) {
  if (y_bd.size() != y_sl.size()) throw PreconditionError("recompose_bio: length mismatch");
  std::vector<std::string> out;
  out.reserve(y_bd.size());
  for (std::size_t i = 0; i < y_bd.size(); ++i) {
    if (y_bd[i] == Bio::O) {
      out.emplace_back("O");
    } else {
      out.push_back(std::string(1, bio_char(y_bd[i])) + "-" + labels.at(static_cast<std::size_t>(y_sl[i])).name);
    }
  }
  return out;
}

Dataset parse_dataset(std::string_view text, LabelVocabulary& labels, const LoadOptions& opts,
                      const std::string& origin) {
  Dataset ds;
  std::vector<std::string> tokens, tags;
  std::size_t record_line = 0;
  std::string bad_transition;

  auto flush = [&]() {
    if (tokens.empty()) return;
    if (!bad_transition.empty()) {
      ++ds.rejected;
      ds.diagnostics.push_back(origin + ":" + std::to_string(record_line) + ": record rejected: " + bad_transition);
    } else {
      AnnotatedUtterance u;
      u.tokens = tokens;
      auto [bd, sl] = decompose_bio(tags, labels, opts.grow_labels, opts.mark_source, opts.mark_target);
      u.y_bd = std::move(bd);
      u.y_sl = std::move(sl);
      u.domain = ds.domain;
      ds.utterances.push_back(std::move(u));
    }
    tokens.clear();
    tags.clear();
    bad_transition.clear();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  ParsedTag prev, cur;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
    if (blank) {
      flush();
      if (nl == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view kDomain = "# domain:";
      if (line.substr(0, kDomain.size()) == kDomain) {
        std::string_view d = line.substr(kDomain.size());
        const auto b = d.find_first_not_of(" \t");
        ds.domain = b == std::string_view::npos ? std::string() : std::string(d.substr(b));
      }
      if (nl == text.size()) break;
      continue;
    }
    const auto tab = line.find('\t');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (tab == std::string_view::npos) throw DataError(where + ": expected token<TAB>tag");
    std::string token(line.substr(0, tab));
    std::string tag(line.substr(tab + 1));
    while (!tag.empty() && (tag.back() == ' ' || tag.back() == '\t')) tag.pop_back();
    if (!parse_tag(tag, cur)) throw DataError(where + ": unknown tag '" + tag + "'");
    if (cur.bio != Bio::O && !opts.grow_labels && !labels.index(cur.label)) {
      throw DataError(where + ": unknown label '" + cur.label + "'");
    }
    if (tokens.empty()) record_line = line_no;
    if (cur.bio == Bio::I && bad_transition.empty()) {
      if (tokens.empty() || prev.bio == Bio::O) {
        bad_transition = "line " + std::to_string(line_no) + ": I-" + cur.label + " without a preceding B";
      } else if (prev.label != cur.label) {
        bad_transition = "line " + std::to_string(line_no) + ": I-" + cur.label + " continues " + prev.label;
      }
    }
    tokens.push_back(std::move(token));
    tags.push_back(std::move(tag));
    prev = cur;
    if (nl == text.size()) break;
  }
  flush();
  if (ds.utterances.empty() && ds.rejected == 0) ds.diagnostics.push_back(origin + ": warning: empty dataset");
  return ds;
}

Dataset load_dataset(const fs::path& path, LabelVocabulary& labels, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), labels, opts, path.string());
}

std::string serialize_dataset(const std::vector<AnnotatedUtterance>& data, const LabelVocabulary& labels,
                              const std::string& domain) {
  std::ostringstream os;
  os << "# domain: " << domain << '\n';
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (k) os << '\n';
    const auto tags = recompose_bio(data[k].y_bd, data[k].y_sl, labels);
    for (std::size_t i = 0; i < data[k].size(); ++i) os << data[k].tokens[i] << '\t' << tags[i] << '\n';
  }
  return os.str();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void write_dataset(const fs::path& path, const std::vector<AnnotatedUtterance>& data, const LabelVocabulary& labels,
                   const std::string& domain) {
  write_text(path, serialize_dataset(data, labels, domain));
}

DomainSplit load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const fs::path dir = path.parent_path();
  std::vector<fs::path> sources, targets, devs;
  std::vector<std::string> target_labels;
  bool in_labels = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    const std::string body = line.substr(b, e - b + 1);
    if (in_labels) {
      target_labels.push_back(body);
      continue;
    }
    if (body == "labels:") {
      in_labels = true;
      continue;
    }
    const auto eq = body.find('=');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw DataError(where + ": expected key = value");
    auto trim = [](std::string s) {
      const auto x = s.find_first_not_of(" \t");
      const auto y = s.find_last_not_of(" \t");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    const std::string key = trim(body.substr(0, eq));
    const fs::path value = dir / trim(body.substr(eq + 1));
    if (key == "source") {
      sources.push_back(value);
    } else if (key == "target") {
      targets.push_back(value);
    } else if (key == "dev") {
      devs.push_back(value);
    } else {
      throw DataError(where + ": unknown manifest key '" + key + "'");
    }
  }
  if (sources.empty()) throw DataError(path.string() + ": manifest lists no source file");

  DomainSplit split;
  for (const auto& p : sources) {
    Dataset ds = load_dataset(p, split.labels, LoadOptions{true, true, false});
    for (auto& u : ds.utterances) split.source.push_back(std::move(u));
    for (auto& d : ds.diagnostics) split.diagnostics.push_back(std::move(d));
  }
  for (const auto& name : target_labels) split.labels.add(name, false, true);
  for (const auto& p : devs) {
    Dataset ds = load_dataset(p, split.labels, LoadOptions{});
    for (auto& u : ds.utterances) split.dev.push_back(std::move(u));
    for (auto& d : ds.diagnostics) split.diagnostics.push_back(std::move(d));
  }
  for (const auto& p : targets) {
    Dataset ds = load_dataset(p, split.labels, LoadOptions{});
    for (auto& u : ds.utterances) split.target.push_back(std::move(u));
    for (auto& d : ds.diagnostics) split.diagnostics.push_back(std::move(d));
  }
  return split;
}

void write_manifest(const fs::path& dir, const DomainSplit& split) {
  fs::create_directories(dir);
  write_dataset(dir / "source.tsv", split.source, split.labels,
                split.source.empty() ? "source" : split.source.front().domain);
  write_dataset(dir / "target.tsv", split.target, split.labels,
                split.target.empty() ? "target" : split.target.front().domain);
  std::ostringstream os;
  os << "source = source.tsv\n";
  if (!split.dev.empty()) {
    write_dataset(dir / "dev.tsv", split.dev, split.labels, split.dev.front().domain);
    os << "dev = dev.tsv\n";
  }
  os << "target = target.tsv\n";
  os << "labels:\n";
  for (std::size_t i : split.labels.target_indices()) os << split.labels.at(i).name << '\n';
  write_text(dir / "manifest.txt", os.str());
}

}  // namespace slotfill
