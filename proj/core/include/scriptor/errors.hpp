#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scriptor {

// Shape or axis disagreement between operands.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid hyperparameter or argument value.
struct ParameterError : std::invalid_argument {
  explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Violated API precondition (consumed tape, non-scalar loss, infeasible target...).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf where finite values are required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input (token streams, XML, config, manifests).
struct ParseError : std::runtime_error {
  std::size_t position = 0;  // byte offset into the offending input when known
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
  ParseError(const std::string& msg, std::size_t pos) : std::runtime_error(msg), position(pos) {}
};

// Filesystem / file-format failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced non-finite loss; carries the last good checkpoint path.
struct DivergenceError : std::runtime_error {
  std::string last_good;
  DivergenceError(const std::string& msg, std::string last_good_path)
      : std::runtime_error(msg), last_good(std::move(last_good_path)) {}
};

}  // namespace scriptor
