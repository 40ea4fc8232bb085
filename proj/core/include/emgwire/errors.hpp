#pragma once

#include <stdexcept>
#include <string>

namespace emgwire {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or out-of-domain argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Frame whose end-of-message byte is not 0xFF.
class BadMarker : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Argument outside the representable range (e.g. a window code beyond 511).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Stream stayed unlocked for longer than the allowed budget.
class SyncLost : public Error {
 public:
  using Error::Error;
};

}  // namespace emgwire
