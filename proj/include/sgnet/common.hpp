#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgnet {

// Error taxonomy shared across the library. Everything derives from
// std::runtime_error so callers can catch broadly at the CLI boundary.
struct DimError : std::runtime_error {
  explicit DimError(const std::string& m) : std::runtime_error(m) {}
};

struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& m) : std::runtime_error(m) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& m) : std::runtime_error(m) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct ModeError : std::runtime_error {
  explicit ModeError(const std::string& m) : std::runtime_error(m) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

inline void check_dim(bool ok, const std::string& msg) {
  if (!ok) throw DimError(msg);
}

inline void check_contract(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

}  // namespace sgnet
