// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// SFAC checkpoint files. Layout, all integers little-endian:
//
//   "SFAC"                      4 bytes magic
//   format_version              u32
//   layer_count                 u32   (number of entries in layer_sizes)
//   layer_sizes[layer_count]    u32 each
//   activation                  u8    (0 relu, 1 tanh)
//   provenance_length           u32
//   provenance                  UTF-8 JSON, provenance_length bytes
//   parameters[param_count]     f32 each, flat order
//   digest                      u64   FNV-1a over every preceding byte
//
// An optional Fisher block may follow, with the same shape:
//
//   "SFAF" | format_version u32 | count u64 | f32[count] | u64 FNV-1a of the block

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfa/mlp.hpp"

namespace sfa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Provenance {
  std::string strategy;
  std::vector<std::string> tasks;    // tasks trained, in order
  std::uint64_t seed = 0;
  std::vector<std::string> parents;  // hex digests of parent checkpoints

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Checkpoint {
  MlpSpec spec;
  ParamVector params;
  Provenance provenance;
  std::uint32_t format_version = kCheckpointVersion;
  std::optional<FisherDiagonal> fisher;

  ModelParams model() const { return ModelParams(spec, params); }
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

/// 16 lowercase hex digits.
std::string digest_hex(std::uint64_t digest);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);

/// Parses and verifies magic, version and digests. Throws FormatError with
/// the offending byte offset.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Digest stored in the main block of an encoded checkpoint.
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters as they come back from a save/load cycle.
ParamVector round_to_f32(const ParamVector& v);

}  // namespace sfa
