#pragma once

#include <stdexcept>
#include <string>

namespace mhsi {

// Numeric values are shared with the C API status codes and the CLI exit codes.
enum class ErrorCode : int {
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
  kShape = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace mhsi
