#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blockdetail {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a documented invariant. `field()` carries a dotted path
/// to the offending value when one is known (e.g. "poses[2].tolerance[5]").
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::string field = {});

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A file or payload could not be parsed. `byte_offset()` is the position in
/// the input where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t byte_offset);

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace blockdetail
