#pragma once

#include <stdexcept>
#include <string>

namespace sapr {

/// Mismatched tensor extents (matmul inner dims, elementwise shapes, ...).
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Violated call contract: non-scalar loss, permutation not a bijection,
/// label out of range, pixel out of export range.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Invalid configuration value (threshold outside [0,1], bad experiment file).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed on-disk data (IDX magic, checkpoint header, truncation).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// NaN propagation, training divergence.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sapr
