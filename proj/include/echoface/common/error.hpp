#pragma once

#include <stdexcept>
#include <string>

namespace echoface {

/// A parameter or configuration value lies outside its valid range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two operands have incompatible dimensions or ordering.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data is malformed, truncated, or otherwise unusable.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace echoface
