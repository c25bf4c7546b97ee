#pragma once

#include <stdexcept>
#include <string>

namespace prefscore {

/// Malformed input file (JSON lines, vocab files, checkpoints, ...).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A domain invariant or operation precondition was violated.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Optimization aborted (non-finite loss, failing instruction candidate, ...).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace prefscore
