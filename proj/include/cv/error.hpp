// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed key, configuration text, or specification line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  /// 1-based line number, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid contextual value specification (type, layer name, order, duplicates).
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Dependency cycle among specifications, found before any propagation happens.
class CycleError : public Error {
 public:
  explicit CycleError(std::vector<std::string> cycle);

  /// Layer names along the cycle; the first name is repeated at the end.
  const std::vector<std::string>& cycle() const noexcept { return cycle_; }

 private:
  std::vector<std::string> cycle_;
};

/// Propagation reached a contextual value that was already updated in the same pass.
class PropagationCycleError : public Error {
 public:
  using Error::Error;
};

/// Concurrent edits that a three-way merge cannot reconcile.
class ConflictError : public Error {
 public:
  explicit ConflictError(std::vector<std::string> keys);

  const std::vector<std::string>& keys() const noexcept { return keys_; }

 private:
  std::vector<std::string> keys_;
};

/// Text that does not convert to the contextual value's declared type.
class TypeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cv
