// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ccnn {

/// Broad failure class. The CLI maps each kind to its own exit code.
enum class ErrorKind {
  usage,    ///< bad flags or an invalid combination of options
  data,     ///< malformed or inconsistent input (files, schema, shapes)
  numeric,  ///< non-finite values or numerically undefined results
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& message) {
  throw Error(ErrorKind::usage, message);
}
[[noreturn]] inline void throw_data(const std::string& message) {
  throw Error(ErrorKind::data, message);
}
[[noreturn]] inline void throw_numeric(const std::string& message) {
  throw Error(ErrorKind::numeric, message);
}

}  // namespace ccnn
