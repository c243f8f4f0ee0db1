#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qident {

/// Argument outside the domain of an operation (bad dimension, bad level, sigma <= 0, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Internal state violates an invariant, e.g. a gain matrix that lost definiteness.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Factorization or inversion failure. `pivot()` is the offending pivot index.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, std::size_t pivot)
        : std::runtime_error(what), pivot_(pivot) {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// Invalid experiment configuration; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace qident
