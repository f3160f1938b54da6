#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "texim/tensor.hpp"

namespace texim::nn {

// Binary parameter file:
//
//   "TEXIMCKP"            8-byte magic
//   u32 version           currently 1
//   u32 count
//   count x {
//     u32 name_length, name bytes (UTF-8)
//     u32 rank, rank x u64 dims
//     product(dims) x f64 payload
//   }
//
// All integers and floats are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params);
// Loads values by name into `params`; every parameter must be present with a
// matching shape.
void load_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params);

}  // namespace texim::nn
