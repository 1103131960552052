#pragma once

#include <stdexcept>
#include <string>

namespace segadv {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform to what an op expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an op (log of 0, |C| < 2, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. calling backward on a non-scalar root.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit ParseError(const std::string& what) : Error(what), offset_(0) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Invalid user configuration (attack, dataset, training or experiment).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace segadv
