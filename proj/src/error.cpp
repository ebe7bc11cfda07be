#include "thomlab/error.hpp"

namespace thomlab {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotFlowPotential: return "NotFlowPotential";
    case ErrorKind::BlowUp: return "BlowUp";
    case ErrorKind::StiffnessFailure: return "StiffnessFailure";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::ExponentialTail: return "ExponentialTail";
    case ErrorKind::InsufficientWindow: return "InsufficientWindow";
    case ErrorKind::NonConvergentSecant: return "NonConvergentSecant";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::RequiresTail: return "RequiresTail";
    case ErrorKind::UnstableModeExcited: return "UnstableModeExcited";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace thomlab
