#pragma once

#include <stdexcept>
#include <string>

namespace eyedas {

// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (bad shape, out-of-range argument).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable on-disk data: dataset layout, manifests, images.
class DataError : public Error {
 public:
  using Error::Error;
};

// Model file decoding failures.
class ModelFormatError : public Error {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kChecksum, kMalformed };

  ModelFormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace eyedas
