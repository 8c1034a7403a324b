#pragma once

#include <stdexcept>
#include <string>

namespace spherereg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated input file. `offset` is the byte position where
// parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A geometric configuration that does not admit a unique answer
// (too few neighbors, eigenvalue ties, collinear samples).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters or inconsistent shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace spherereg
