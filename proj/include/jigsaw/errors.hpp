#pragma once

#include <stdexcept>
#include <string>

namespace jigsaw {

// Bad caller arguments (out-of-range index, invalid mix, ...).
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// Inconsistent data exchanged between components (e.g. a gradient whose
// coverage mask does not match the suffix rule).
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or missing configuration (empty profile, wrong model kind, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace jigsaw
