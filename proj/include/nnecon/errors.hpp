#pragma once

#include <stdexcept>
#include <string>

namespace nnecon {

// Invalid parameter or argument outside its mathematical domain.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// An iterative routine failed to converge or produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Bad run configuration: missing files, unknown keys, inconsistent requests.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nnecon
