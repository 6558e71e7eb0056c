#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace purifylab {

enum class ErrorKind {
    InvalidDims,
    NotHermitian,
    NotPSD,
    NotNormalized,
    DomainError,
    NotTracePreserving,
    EnvironmentTooSmall,
    NotUnitary,
    SingularNormalizer,
    InvalidWeights,
    TooLarge,
    ParseError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::InvalidDims: return "InvalidDims";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::NotTracePreserving: return "NotTracePreserving";
    case ErrorKind::EnvironmentTooSmall: return "EnvironmentTooSmall";
    case ErrorKind::NotUnitary: return "NotUnitary";
    case ErrorKind::SingularNormalizer: return "SingularNormalizer";
    case ErrorKind::InvalidWeights: return "InvalidWeights";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Exception carrying a machine-checkable kind alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace purifylab
