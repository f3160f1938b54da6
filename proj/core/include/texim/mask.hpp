#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace texim {

// Row validity flags, 1 for real positions and 0 for padding.
using Mask = std::vector<std::uint8_t>;
using MaskView = std::span<const std::uint8_t>;

}  // namespace texim
