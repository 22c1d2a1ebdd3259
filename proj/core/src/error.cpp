#include "eprcam/error.hpp"

namespace eprcam {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::FitFailure: return "fit-failure";
        case ErrorKind::Internal: return "internal-consistency";
        case ErrorKind::Io: return "io";
        case ErrorKind::Format: return "format";
        case ErrorKind::Schema: return "schema";
    }
    return "unknown";
}

}  // namespace eprcam
