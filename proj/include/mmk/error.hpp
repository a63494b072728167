#pragma once

#include <stdexcept>
#include <string>

namespace mmk {

// Base of every error raised by the library. The CLI catches this type and
// prefixes the message with the failing stage.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidLocation : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable input files.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Malformed content: bad magic, inconsistent sizes, non-finite values.
class FormatError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmk
