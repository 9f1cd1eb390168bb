#pragma once

#include <stdexcept>
#include <string>

namespace stratacast {

enum class ErrorKind {
  invalid_argument,  // caller passed something the contract forbids
  io,                // file missing, unreadable, or malformed on disk
  data,              // dataset content violates an invariant
  numeric,           // computation became undefined (zero variance, NaN, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace stratacast
