#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace mmdial {

// Base class for every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line (or record) number.
class ParseError : public Error {
 public:
  ParseError(const std::filesystem::path& path, std::size_t line, const std::string& what)
      : Error(path.string() + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A well-formed value that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Score outside its question's scale.
class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DuplicateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace mmdial
