#ifndef DOCIE_ERROR_HPP_
#define DOCIE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace docie {

// Malformed input files (JSON syntax, bad field types).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally valid input that violates a documented invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke an API precondition (shape mismatch, index out of range).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace docie

#endif  // DOCIE_ERROR_HPP_
