// Copyright (c) 2026 The SFA Lab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy shared by all modules. Every error the library raises
// derives from sfa::Error so callers can catch one type at the CLI boundary.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sfa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched vector lengths, matrix shapes or element counts.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument outside the operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Bad experiment configuration. Carries the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfa
