#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emu {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument (shape, range, value) was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that does not permit the operation.
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Every batch of an epoch produced a non-finite loss.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t member_index, const std::string& what)
      : NumericError("member " + std::to_string(member_index) + ": " + what),
        member_index_(member_index) {}

  std::size_t member_index() const noexcept { return member_index_; }

 private:
  std::size_t member_index_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// File is not in a format (or format version) this build understands.
class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

/// File claims a supported format but its contents are inconsistent or truncated.
class CorruptCheckpoint : public Error {
 public:
  using Error::Error;
};

}  // namespace emu
