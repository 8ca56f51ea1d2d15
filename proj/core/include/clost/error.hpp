#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clost {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violated a documented contract (ranges, preconditions, config).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A stream or file could not be parsed. Carries the 1-based line number
/// when one is known (0 otherwise).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

/// A chat backend failed (network, protocol, exhausted retries).
class BackendError : public Error {
 public:
  using Error::Error;
};

/// A backend returned an empty completion where content was required.
class EmptyCompletion : public Error {
 public:
  using Error::Error;
};

/// An agent completion did not match its wire format, after retry.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Task construction errors.
class NotEnoughOptions : public Error {
 public:
  using Error::Error;
};
class NoGoldDistinction : public Error {
 public:
  using Error::Error;
};
class NoHardPair : public Error {
 public:
  using Error::Error;
};
class TiedScores : public Error {
 public:
  using Error::Error;
};

// Policy errors.
class UnsupportedAnswer : public Error {
 public:
  using Error::Error;
};
class UnsupportedQuestion : public Error {
 public:
  using Error::Error;
};

/// A DAT word set referenced words absent from the vector table.
class MissingWord : public Error {
 public:
  using Error::Error;
};

}  // namespace clost
