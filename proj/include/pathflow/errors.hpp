#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pathflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown type id or a malformed type hierarchy.
class CatalogError : public Error {
 public:
  using Error::Error;
};

/// The data does not agree with the dataset manifest (unknown attribute,
/// missing column, invalid manifest document).
class ManifestError : public Error {
 public:
  using Error::Error;
};

/// A malformed input record. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid synthesis or run parameters.
class ParamError : public Error {
 public:
  using Error::Error;
};

class EngineError : public Error {
 public:
  using Error::Error;
};

class QueryError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace pathflow
