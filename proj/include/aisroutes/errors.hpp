// Error hierarchy shared by the library and the command-line driver.
#pragma once

#include <stdexcept>
#include <string>

namespace aisroutes {

/// Base class; each subclass maps onto one process exit code.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code, const char* kind)
      : std::runtime_error(what), exit_code_(exit_code), kind_(kind) {}
  int exit_code() const noexcept { return exit_code_; }
  const char* kind() const noexcept { return kind_; }

 private:
  int exit_code_;
  const char* kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, 2, "config") {}
};

class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& what) : Error(what, 3, "missing-input") {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error(what, 4, "data-consistency") {}
};

}  // namespace aisroutes
