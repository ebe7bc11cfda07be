#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thomlab {

enum class ErrorKind {
    DimensionMismatch,
    InvalidArgument,
    NotFlowPotential,
    BlowUp,
    StiffnessFailure,
    NoConvergence,
    SingularJacobian,
    ExponentialTail,
    InsufficientWindow,
    NonConvergentSecant,
    EmptyRegion,
    RequiresTail,
    UnstableModeExcited,
    DegenerateFit,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind; the CLI maps kinds to exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace thomlab
