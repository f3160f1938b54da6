#pragma once

#include <stdexcept>
#include <string>

namespace texim {

// Broad failure categories. The CLI prints the code name on its error line.
enum class ErrorCode {
    kInvalidArgument,
    kShapeMismatch,
    kNonFinite,
    kConfig,
    kIo,
    kFormat,
    kEmptyInput,
    kGradientCheck,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const char* message) {
    if (!condition) fail(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace texim
