#include "texim/error.hpp"

namespace texim {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "invalid_argument";
        case ErrorCode::kShapeMismatch: return "shape_mismatch";
        case ErrorCode::kNonFinite: return "non_finite";
        case ErrorCode::kConfig: return "config";
        case ErrorCode::kIo: return "io";
        case ErrorCode::kFormat: return "format";
        case ErrorCode::kEmptyInput: return "empty_input";
        case ErrorCode::kGradientCheck: return "gradient_check";
    }
    return "unknown";
}

}  // namespace texim
