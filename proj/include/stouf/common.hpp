#pragma once

#include <charconv>
#include <stdexcept>
#include <string>

namespace stouf {

// Bad input data or configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure at runtime, e.g. non-finite gradients (CLI exit code 3).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace stouf
