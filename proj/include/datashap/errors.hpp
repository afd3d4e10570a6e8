#pragma once

#include <stdexcept>
#include <string>

namespace datashap {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input (CSV rows, config lines, game files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Binary layout violations (IDX headers, parameter blobs).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Inputs that are individually valid but disagree with each other.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Label column or label values that are not usable class indices.
class LabelError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Problem size exceeds what an exhaustive routine can enumerate.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration; the message carries the field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace datashap
