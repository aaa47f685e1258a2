#pragma once

#include <stdexcept>
#include <string>

namespace banditflow {

/// Argument outside the mathematical domain of an operation (t < 2, theta < 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative solver failed to converge. The message carries the bracket state.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The perturbation system is singular or numerically indistinguishable from singular.
class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration combination the library does not support (e.g. a bias
/// prediction for a non-canonical exploration function).
class UnsupportedConfiguration : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent configuration. `field` names the offending key path.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace banditflow
