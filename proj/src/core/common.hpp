#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace chartloc {

inline constexpr double kSpeedOfLight = 299792458.0;

enum class ErrorCode : int {
  invalid_argument = 1,
  io = 2,
  bad_format = 3,
  numeric = 4,
  unsupported = 5,
};

// All precondition and runtime failures in the core throw Error; the C API
// boundary translates the code into a status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, const std::string& msg,
                    ErrorCode code = ErrorCode::invalid_argument) {
  if (!cond) fail(code, msg);
}

}  // namespace chartloc
