#pragma once

#include <stdexcept>
#include <string>

namespace actsum {

enum class ErrorCode {
  InvalidArgument = 1,
  Domain = 2,
  Load = 3,
  Io = 4,
  Numeric = 5,
  Internal = 6,
};

// Base of everything the library throws. The code maps 1:1 onto the C API
// status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::Domain, what) {}
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& what) : Error(ErrorCode::Load, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCode::Numeric, what) {}
};

}  // namespace actsum
