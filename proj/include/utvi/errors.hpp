#pragma once

#include <stdexcept>
#include <string>

namespace utvi {

/// Incompatible array shapes or dimensions.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid parameter value (kappa <= 0, n < 2, ...).
struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Non-finite value produced during propagation or training.
/// `where` identifies the failing element or training step.
struct NumericError : std::runtime_error {
    std::string where;
    NumericError(const std::string& msg, std::string where_ = {})
        : std::runtime_error(msg), where(std::move(where_)) {}
};

/// Checkpoint/config/architecture mismatch when loading artifacts.
struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace utvi
