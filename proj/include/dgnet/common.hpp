#pragma once

#include <stdexcept>
#include <string>

namespace dgnet {

inline constexpr const char* kVersion = "0.1.0";

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

struct NonFiniteError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace dgnet
