#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dpface {

/// Stable error identifiers. The CLI prints these names verbatim.
enum class ErrorCode {
    EmptyInput,
    ParseError,
    ShapeError,
    DomainError,
    DegenerateFit,
    InconsistentOptics,
    NotASaddle,
    Diverged,
    InsufficientShots,
    DegenerateLights,
    OutOfBall,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Malformed file content. `offset` is the byte position where parsing failed.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& message);

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const char* message)
{
    if (!condition)
        fail(code, message);
}

} // namespace dpface
