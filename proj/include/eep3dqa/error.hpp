// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace eep3dqa {

// Failure inside the pipeline (bad input data, rendering, fitting, backend).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline void require_config(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace detail
}  // namespace eep3dqa
