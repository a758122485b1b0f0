#pragma once

#include <stdexcept>
#include <string>

namespace cwm {

/// Failure category. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  kConfig = 1,
  kData = 2,
  kRuntime = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::kConfig, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::kData, msg); }
[[noreturn]] inline void throw_runtime(const std::string& msg) { throw Error(ErrorKind::kRuntime, msg); }

#define CWM_CHECK(cond, msg)                                     \
  do {                                                           \
    if (!(cond)) ::cwm::throw_runtime(std::string("check failed: ") + (msg)); \
  } while (0)

}  // namespace cwm
