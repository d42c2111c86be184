#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dftmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid distribution parameters or an argument outside a law's domain.
class DistributionError : public Error {
 public:
  using Error::Error;
};

/// The reference-scale root finder could not bracket a solution.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A fault tree violates a structural invariant (cycle, arity, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Syntax or declaration error in a `.dft` document, with its 1-based position.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& msg)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Importance-sampling weights are undefined for the sampled point.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// The oracle was asked to handle a tree shape it does not support.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dftmc
