#pragma once

#include <stdexcept>
#include <string>

namespace smia {

enum class ErrorKind {
  invalid_input,     // violated precondition on caller-supplied data
  degenerate,        // input too small for the requested operation
  config,            // bad configuration value or flag
  schema,            // malformed JSONL line or file content
  upstream_missing,  // a stage input file does not exist
  transport,         // external client failure, safe to retry
  numeric,           // non-finite value during training
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Thrown by clients when a call may succeed if repeated with the same request.
class RetryableError : public Error {
 public:
  explicit RetryableError(const std::string& what) : Error(ErrorKind::transport, what) {}
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace smia
