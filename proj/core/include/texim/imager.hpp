#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace texim::imager {

struct ImageSpec {
    std::size_t rows = 32;    // I_l
    std::size_t cols = 16;    // I_b
    std::size_t channels = 1; // 1 (grayscale) or 3 (RGB, channel-interleaved)

    std::size_t pixel_count() const noexcept { return rows * cols * channels; }
    void validate() const;
    friend bool operator==(const ImageSpec&, const ImageSpec&) = default;
};

struct PixelImage {
    ImageSpec spec;
    std::vector<std::uint8_t> pixels;  // row-major, channel-interleaved

    std::uint8_t at(std::size_t row, std::size_t col, std::size_t channel = 0) const {
        return pixels[(row * spec.cols + col) * spec.channels + channel];
    }
    friend bool operator==(const PixelImage&, const PixelImage&) = default;
};

enum class Rounding { kTruncate, kNearest };

struct Normalized {
    std::vector<double> values;
    bool degenerate = false;  // max == min; every value mapped to 0
};

// Min-max scaling to [0, 1].
Normalized normalize(std::span<const double> embedding);

// v * 255 cast to uint8 (truncation by default).
std::vector<std::uint8_t> scale_quantize(std::span<const double> normalized,
                                         Rounding rounding = Rounding::kTruncate);

// Fills the image row by row, column by column, channel by channel.
PixelImage reshape(std::span<const std::uint8_t> values, const ImageSpec& spec);

// normalize -> scale_quantize -> reshape.
PixelImage to_image(std::span<const double> embedding, const ImageSpec& spec,
                    Rounding rounding = Rounding::kTruncate);

// Binary PGM (P5) for one channel, PPM (P6) for three; maxval 255.
void write_image(std::ostream& out, const PixelImage& image);
PixelImage read_image(std::istream& in);
void write_image(const std::filesystem::path& path, const PixelImage& image);
PixelImage read_image(const std::filesystem::path& path);

// ---- memory footprint ------------------------------------------------------

struct MemoryComparisonInputs {
    double plain_text_bytes = 2123.57;  // average bytes per stored sequence
    std::size_t sequence_tokens = 512;
    std::size_t word2vec_dims = 300;
    std::size_t bert_dims = 768;
    std::size_t sequence_embedding_dims = 512;
    std::size_t float_bytes = 4;
    std::size_t rgb_channels = 3;
};

struct MemoryRow {
    std::string representation;
    double conventional_bytes = 0.0;
    double image_bytes = 0.0;
    double compression_percent = 0.0;
    double reference_bytes = 0.0;  // published figure, 0 if none
    std::string note;
};

// One row per comparison: plain text, Word2Vec and BERT word embeddings,
// float sequence embedding, and a three-channel image of the same size.
std::vector<MemoryRow> memory_report(const ImageSpec& spec, const MemoryComparisonInputs& inputs = {});
void write_memory_report_csv(std::ostream& out, const std::vector<MemoryRow>& rows);

}  // namespace texim::imager
