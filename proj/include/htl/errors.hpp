#pragma once

#include <stdexcept>
#include <string>

namespace htl {

/// Caller passed arguments that violate an operation's preconditions.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear-algebra routine failed (non-convergence, loss of definiteness).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad transform parameters, unknown keys, out-of-range fields.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& field, const std::string& what)
        : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(field) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace htl
