#pragma once

#include <stdexcept>
#include <string>

namespace aetsgd {

// Base for every error raised by the library. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed schedules, configs, edge lists, probability vectors.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A node-protocol precondition was violated (e.g. stepping while Wait).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

// The event queue drained while some nodes had work left.
class DeadlockError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// IDX ingestion failures, one type per failure mode.
class FormatError : public Error {
 public:
  using Error::Error;
};
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};
class CountMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace aetsgd
