// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "sfa/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "sfa/errors.hpp"

namespace sfa {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'A', 'C'};
constexpr char kFisherMagic[4] = {'S', 'F', 'A', 'F'};
constexpr std::uint32_t kMaxLayers = 4096;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return at_; }
  std::size_t remaining() const { return in_.size() - at_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated checkpoint: missing ") + what, at_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[at_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[at_ + i]} << (8 * i);
    at_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[at_ + i]} << (8 * i);
    at_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(at_, n);
    at_ += n;
    return s;
  }
  std::span<const std::uint8_t> consumed_since(std::size_t start) const { return in_.subspan(start, at_ - start); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t at_ = 0;
};

float to_f32(double v, const char* what) {
  const auto f = static_cast<float>(v);
  if (!std::isfinite(f)) throw NumericError(std::string(what) + ": value does not fit in float32");
  return f;
}

std::string provenance_json(const Provenance& p) {
  nlohmann::json j;
  j["strategy"] = p.strategy;
  j["tasks"] = p.tasks;
  j["seed"] = p.seed;
  j["parents"] = p.parents;
  return j.dump();
}

Provenance parse_provenance(std::span<const std::uint8_t> bytes, std::size_t offset) {
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    Provenance p;
    p.strategy = j.at("strategy").get<std::string>();
    p.tasks = j.at("tasks").get<std::vector<std::string>>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.parents = j.at("parents").get<std::vector<std::string>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed provenance block: ") + e.what(), offset);
  }
}

void write_main_block(Writer& w, const Checkpoint& c) {
  c.spec.validate();
  if (c.params.size() != c.spec.param_count()) throw DimensionError("checkpoint parameter count does not match spec");
  w.bytes(kMagic, 4);
  w.u32(c.format_version);
  w.u32(static_cast<std::uint32_t>(c.spec.layer_sizes.size()));
  for (const auto s : c.spec.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  w.u8(static_cast<std::uint8_t>(c.spec.activation));
  const std::string prov = provenance_json(c.provenance);
  w.u32(static_cast<std::uint32_t>(prov.size()));
  w.bytes(prov.data(), prov.size());
  for (const auto v : c.params.values()) w.f32(to_f32(v, "checkpoint parameter"));
  w.u64(fnv1a64(w.data()));
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kHex[digest & 0xF];
    digest >>= 4;
  }
  return s;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  write_main_block(w, ckpt);
  if (ckpt.fisher) {
    if (ckpt.fisher->size() != ckpt.params.size()) throw DimensionError("Fisher block length does not match parameters");
    Writer f;
    f.bytes(kFisherMagic, 4);
    f.u32(ckpt.format_version);
    f.u64(ckpt.fisher->size());
    for (const auto v : ckpt.fisher->values()) f.f32(to_f32(v, "Fisher entry"));
    f.u64(fnv1a64(f.data()));
    w.bytes(f.data().data(), f.data().size());
  }
  return std::move(w.data());
}

std::uint64_t checkpoint_digest(const Checkpoint& ckpt) {
  Writer w;
  write_main_block(w, ckpt);
  const auto& d = w.data();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{d[d.size() - 8 + static_cast<std::size_t>(i)]} << (8 * i);
  return v;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.remaining() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not an SFAC checkpoint: bad magic", 0);
  }
  r.take(4, "magic");
  Checkpoint c;
  const std::size_t version_at = r.offset();
  c.format_version = r.u32("format version");
  if (c.format_version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(c.format_version), version_at);
  }
  const std::size_t layers_at = r.offset();
  const std::uint32_t layer_count = r.u32("layer count");
  if (layer_count < 2 || layer_count > kMaxLayers) {
    throw FormatError("implausible layer count " + std::to_string(layer_count), layers_at);
  }
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t s = r.u32("layer size");
    if (s == 0 || s > (1u << 24)) throw FormatError("implausible layer size " + std::to_string(s), at);
    c.spec.layer_sizes.push_back(s);
  }
  const std::size_t act_at = r.offset();
  const std::uint8_t act = r.u8("activation tag");
  if (act > 1) throw FormatError("unknown activation tag " + std::to_string(act), act_at);
  c.spec.activation = static_cast<Activation>(act);

  const std::uint32_t prov_len = r.u32("provenance length");
  const std::size_t prov_at = r.offset();
  c.provenance = parse_provenance(r.take(prov_len, "provenance"), prov_at);

  const std::size_t count = c.spec.param_count();
  r.need(count * 4, "parameter payload");
  std::vector<double> values(count);
  for (auto& v : values) v = r.f32("parameter");
  const std::size_t digest_at = r.offset();
  const std::uint64_t expected = fnv1a64(r.consumed_since(0));
  if (r.u64("digest") != expected) throw FormatError("checkpoint digest mismatch", digest_at);
  try {
    c.params = ParamVector(std::move(values));
  } catch (const NumericError&) {
    throw FormatError("non-finite parameter in payload", digest_at);
  }

  if (r.remaining() > 0) {
    const std::size_t block_at = r.offset();
    const auto magic = r.take(4, "Fisher block magic");
    if (std::memcmp(magic.data(), kFisherMagic, 4) != 0) throw FormatError("unexpected trailing data", block_at);
    const std::size_t fver_at = r.offset();
    if (r.u32("Fisher block version") != kCheckpointVersion) throw FormatError("unsupported Fisher block version", fver_at);
    const std::size_t fcount_at = r.offset();
    const std::uint64_t fcount = r.u64("Fisher count");
    if (fcount != count) throw FormatError("Fisher block length does not match parameters", fcount_at);
    r.need(fcount * 4, "Fisher payload");
    std::vector<double> fvals(fcount);
    for (auto& v : fvals) v = r.f32("Fisher entry");
    const std::size_t fdigest_at = r.offset();
    const std::uint64_t fexpected = fnv1a64(r.consumed_since(block_at));
    if (r.u64("Fisher digest") != fexpected) throw FormatError("Fisher block digest mismatch", fdigest_at);
    try {
      c.fisher = FisherDiagonal(std::move(fvals));
    } catch (const Error&) {
      throw FormatError("invalid Fisher entries", fdigest_at);
    }
    if (r.remaining() > 0) throw FormatError("unexpected trailing data", r.offset());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

ParamVector round_to_f32(const ParamVector& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(to_f32(v[i], "round_to_f32"));
  return ParamVector(std::move(out));
}

}  // namespace sfa
