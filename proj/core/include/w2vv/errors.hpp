// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace w2vv {

/// Coarse error category; the CLI maps these onto exit codes.
enum class ErrorKind {
  kData,     // malformed or inconsistent input files
  kNumeric,  // NaN/Inf or other arithmetic failure
  kUsage,    // bad configuration or API misuse
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(ErrorKind::kData,
              source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateKeyError : public Error {
 public:
  explicit DuplicateKeyError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class DimensionMismatchError : public Error {
 public:
  explicit DimensionMismatchError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class ValueError : public Error {
 public:
  explicit ValueError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class UnsupportedVersionError : public Error {
 public:
  explicit UnsupportedVersionError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

/// Evaluation protocol violated, e.g. a query with no relevant caption.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kUsage, what) {}
};

/// Tensor shapes that do not chain or do not match their consumer.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ErrorKind::kUsage, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::kNumeric, what) {}
};

}  // namespace w2vv
