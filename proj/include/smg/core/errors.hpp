#pragma once

#include <stdexcept>
#include <string>

namespace smg {

// Error taxonomy. Each class maps to a distinct CLI exit code (see tools/).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error("input error: " + msg) {}
};

// Retryable: the operation may succeed later (e.g. replay buffer not yet filled).
struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error("state error: " + msg) {}
};

struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& msg) : std::runtime_error("integrity error: " + msg) {}
};

struct OracleError : std::runtime_error {
  explicit OracleError(const std::string& msg) : std::runtime_error("oracle error: " + msg) {}
};

} // namespace smg
