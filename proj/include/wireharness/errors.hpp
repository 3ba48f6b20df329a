#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wireharness {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A control command or configuration value lies outside its allowed box.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Invalid input to a fitting routine (empty or non-finite data).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or input file contents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The projected-gradient solver ran out of iterations.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Malformed CSV or JSON input. Carries the offending file and line (1-based, 0 if unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg), file_(file), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace wireharness
