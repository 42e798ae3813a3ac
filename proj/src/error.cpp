#include "dpface/error.hpp"

namespace dpface {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::InconsistentOptics: return "InconsistentOptics";
    case ErrorCode::NotASaddle: return "NotASaddle";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::InsufficientShots: return "InsufficientShots";
    case ErrorCode::DegenerateLights: return "DegenerateLights";
    case ErrorCode::OutOfBall: return "OutOfBall";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message)
    , code_(code)
{
}

ParseError::ParseError(std::size_t offset, const std::string& message)
    : Error(ErrorCode::ParseError, message + " (at byte " + std::to_string(offset) + ")")
    , offset_(offset)
{
}

void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace dpface
