#pragma once

#include <stdexcept>
#include <string>

namespace xienh {

/// Precondition violated by the caller (bad shape, bad value, empty input).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

/// Audio file is readable but not 16-bit PCM mono at the pipeline rate.
class UnsupportedFormat : public std::runtime_error {
 public:
  explicit UnsupportedFormat(const std::string& what) : std::runtime_error(what) {}
};

/// Checkpoint or stats file failed magic, version, checksum or shape audit.
class CorruptCheckpoint : public std::runtime_error {
 public:
  explicit CorruptCheckpoint(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the nn engine when finite checking is on and an op yields NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace xienh
