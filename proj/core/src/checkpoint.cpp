// Copyright 2026 The slotfill Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotfill/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "slotfill/hash.hpp"

namespace slotfill {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  std::string& str() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::string origin) : buf_(buf), origin_(std::move(origin)) {}
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > buf_.size()) {
      throw CheckpointError(origin_ + ": truncated while reading " + what + " at byte " + std::to_string(pos_));
    }
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string encode_meta(const CheckpointMeta& m) {
  Writer w;
  w.put_string(m.config_text);
  w.put(static_cast<std::uint32_t>(m.vocab.size()));
  for (const auto& t : m.vocab) w.put_string(t);
  w.put(static_cast<std::uint32_t>(m.label_names.size()));
  for (std::size_t i = 0; i < m.label_names.size(); ++i) {
    w.put_string(m.label_names[i]);
    w.put(m.label_source.at(i));
    w.put(m.label_target.at(i));
  }
  w.put(m.vocab_hash);
  w.put(m.label_hash);
  return std::move(w.str());
}

CheckpointMeta decode_meta(const std::string& bytes, const std::string& origin) {
  Reader r(bytes, origin + " (metadata)");
  CheckpointMeta m;
  m.config_text = r.get_string("config");
  const auto nv = r.get<std::uint32_t>("vocabulary size");
  for (std::uint32_t i = 0; i < nv; ++i) m.vocab.push_back(r.get_string("vocabulary"));
  const auto nl = r.get<std::uint32_t>("label count");
  for (std::uint32_t i = 0; i < nl; ++i) {
    m.label_names.push_back(r.get_string("label name"));
    m.label_source.push_back(r.get<std::uint8_t>("label flags"));
    m.label_target.push_back(r.get<std::uint8_t>("label flags"));
  }
  m.vocab_hash = r.get<std::uint64_t>("vocabulary hash");
  m.label_hash = r.get<std::uint64_t>("label hash");
  return m;
}

}  // namespace

std::uint64_t config_fingerprint(const std::string& model_config_text, std::uint64_t vocab_hash,
                                 std::uint64_t label_hash) {
  std::uint64_t h = fnv1a(model_config_text);
  h = fnv1a_bytes(&vocab_hash, sizeof(vocab_hash), h);
  h = fnv1a_bytes(&label_hash, sizeof(label_hash), h);
  return h;
}

void save_checkpoint(const fs::path& path, const ParameterStore& params, const CheckpointMeta& meta,
                     std::uint64_t fingerprint) {
  Writer head;
  head.put_bytes("SLTF", 4);
  head.put(kCheckpointVersion);
  head.put(fingerprint);
  const std::string mb = encode_meta(meta);
  head.put(static_cast<std::uint64_t>(mb.size()));
  head.put_bytes(mb.data(), mb.size());
  const auto all = params.all();
  head.put(static_cast<std::uint32_t>(all.size()));
  std::uint64_t offset = 0;
  for (const Parameter* p : all) {
    head.put_string(p->name);
    head.put(std::uint8_t{1});
    const auto& shape = p->value.shape();
    head.put(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) head.put(static_cast<std::uint64_t>(d));
    const std::uint64_t nbytes = p->value.numel() * sizeof(double);
    head.put(offset);
    head.put(nbytes);
    head.put(fnv1a_bytes(p->value.raw(), nbytes));
    offset += nbytes;
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(head.str().data(), static_cast<std::streamsize>(head.str().size()));
    for (const Parameter* p : all) {
      out.write(reinterpret_cast<const char*>(p->value.raw()),
                static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
    }
    out.flush();
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  const std::string origin = path.string();
  Reader r(buf, origin);
  r.need(4, "magic");
  if (buf.compare(0, 4, "SLTF") != 0) throw CheckpointError(origin + ": not a checkpoint (bad magic)");
  (void)r.get<std::uint32_t>("magic");
  Checkpoint ck;
  ck.version = r.get<std::uint32_t>("version");
  if (ck.version != kCheckpointVersion) {
    throw CheckpointError(origin + ": unsupported checkpoint version " + std::to_string(ck.version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  ck.fingerprint = r.get<std::uint64_t>("fingerprint");
  const auto mlen = r.get<std::uint64_t>("metadata length");
  r.need(mlen, "metadata");
  ck.meta = decode_meta(buf.substr(r.pos(), mlen), origin);
  const std::size_t table_start = r.pos() + mlen;
  std::string rest = buf.substr(table_start);
  Reader t(rest, origin);
  const auto count = t.get<std::uint32_t>("tensor count");
  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset, nbytes, checksum;
  };
  std::vector<Entry> entries;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = t.get_string("tensor name");
    if (!seen.insert(e.name).second) throw CheckpointError(origin + ": duplicate tensor name '" + e.name + "'");
    const auto dtype = t.get<std::uint8_t>("dtype");
    if (dtype != 1) throw CheckpointError(origin + ": tensor '" + e.name + "' has unsupported dtype");
    const auto rank = t.get<std::uint32_t>("rank");
    std::uint64_t numel = rank ? 1 : 0;
    for (std::uint32_t k = 0; k < rank; ++k) {
      e.shape.push_back(static_cast<std::size_t>(t.get<std::uint64_t>("dims")));
      numel *= e.shape.back();
    }
    e.offset = t.get<std::uint64_t>("offset");
    e.nbytes = t.get<std::uint64_t>("byte count");
    e.checksum = t.get<std::uint64_t>("checksum");
    if (e.nbytes != numel * sizeof(double)) {
      throw CheckpointError(origin + ": tensor '" + e.name + "' byte count does not match its shape");
    }
    entries.push_back(std::move(e));
  }
  const std::size_t payload = table_start + t.pos();
  for (auto& e : entries) {
    const std::size_t at = payload + e.offset;
    if (at + e.nbytes > buf.size() || at < payload) {
      throw CheckpointError(origin + ": truncated payload for tensor '" + e.name + "' at offset " + std::to_string(e.offset));
    }
    if (fnv1a_bytes(buf.data() + at, e.nbytes) != e.checksum) {
      throw CheckpointError(origin + ": checksum mismatch in tensor '" + e.name + "' (payload offset " +
                            std::to_string(e.offset) + ", file byte " + std::to_string(at) + ")");
    }
    std::vector<double> data(e.nbytes / sizeof(double));
    std::memcpy(data.data(), buf.data() + at, e.nbytes);
    ck.tensors.push_back({e.name, Tensor(e.shape, std::move(data))});
  }
  return ck;
}

void verify_fingerprint(const Checkpoint& ckpt, std::uint64_t expected) {
  if (ckpt.fingerprint != expected) {
    std::ostringstream os;
    os << "checkpoint fingerprint mismatch: stored " << std::hex << ckpt.fingerprint << ", expected " << expected
       << " (config, vocabulary or labels differ)";
    throw CheckpointError(os.str());
  }
}

void restore_parameters(ParameterStore& params, const Checkpoint& ckpt) {
  std::set<std::string> loaded;
  for (const auto& nt : ckpt.tensors) {
    Parameter* p = params.find(nt.name);
    if (!p) throw CheckpointError("checkpoint tensor '" + nt.name + "' does not belong to the model");
    if (p->value.shape() != nt.value.shape()) {
      throw CheckpointError("checkpoint tensor '" + nt.name + "' has shape " + shape_string(nt.value.shape()) +
                            ", model expects " + shape_string(p->value.shape()));
    }
    p->value = nt.value;
    loaded.insert(nt.name);
  }
  for (const Parameter* p : params.all()) {
    if (!loaded.count(p->name)) throw CheckpointError("checkpoint is missing tensor '" + p->name + "'");
  }
}

}  // namespace slotfill
