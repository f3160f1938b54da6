#include "texim/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "texim/error.hpp"

namespace texim::nn {

namespace {

constexpr char kMagic[8] = {'T', 'E', 'X', 'I', 'M', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    require(in.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorCode::kFormat,
            "checkpoint: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors) {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) put<std::uint64_t>(out, d);
        for (double v : tensor.values()) put<double>(out, v);
    }
    require(static_cast<bool>(out), ErrorCode::kIo, "checkpoint: write failed");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    require(in.gcount() == sizeof(magic) && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
            ErrorCode::kFormat, "checkpoint: bad magic");
    const auto version = get<std::uint32_t>(in);
    require(version == kCheckpointVersion, ErrorCode::kFormat,
            "checkpoint: unsupported version " + std::to_string(version));
    const auto count = get<std::uint32_t>(in);
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = get<std::uint32_t>(in);
        require(name_len < (1u << 16), ErrorCode::kFormat, "checkpoint: implausible name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        require(in.gcount() == static_cast<std::streamsize>(name_len), ErrorCode::kFormat,
                "checkpoint: truncated name");
        const auto rank = get<std::uint32_t>(in);
        require(rank <= Tensor::kMaxRank, ErrorCode::kFormat, "checkpoint: rank too large");
        std::vector<std::size_t> dims(rank);
        std::size_t n = 1;
        for (auto& d : dims) {
            d = static_cast<std::size_t>(get<std::uint64_t>(in));
            require(d < (1ull << 32), ErrorCode::kFormat, "checkpoint: implausible dimension");
            n *= d;
        }
        std::vector<double> values(n);
        for (double& v : values) v = get<double>(in);
        tensors.push_back({std::move(name), Tensor(dims, std::move(values))});
    }
    return tensors;
}

void save_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params) {
    std::vector<NamedTensor> tensors;
    tensors.reserve(params.size());
    for (const Parameter* p : params) tensors.push_back({p->name, p->value});
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "checkpoint: cannot open " + path.string());
    write_checkpoint(out, tensors);
}

void load_checkpoint(const std::filesystem::path& path, std::span<Parameter* const> params) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::kIo, "checkpoint: cannot open " + path.string());
    auto tensors = read_checkpoint(in);
    std::unordered_map<std::string, Tensor*> by_name;
    for (auto& t : tensors) by_name[t.name] = &t.tensor;
    for (Parameter* p : params) {
        auto it = by_name.find(p->name);
        require(it != by_name.end(), ErrorCode::kFormat, "checkpoint: missing tensor " + p->name);
        require(it->second->same_shape(p->value), ErrorCode::kFormat,
                "checkpoint: tensor " + p->name + " has shape " + it->second->shape_string() +
                    ", expected " + p->value.shape_string());
        p->value = *it->second;
        p->grad = Tensor(p->value.shape(), 0.0);
    }
}

}  // namespace texim::nn
