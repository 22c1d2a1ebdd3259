#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eprcam {

enum class ErrorKind {
    InvalidParameter,
    DimensionMismatch,
    InsufficientData,
    FitFailure,
    Internal,
    Io,
    Format,
    Schema,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library. The kind lets callers (and the CLI
/// exit-code mapping) branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

}  // namespace eprcam
