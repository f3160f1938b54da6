#include "texim/imager.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include "texim/error.hpp"

namespace texim::imager {

void ImageSpec::validate() const {
    require(rows > 0 && cols > 0, ErrorCode::kConfig, "image: rows and columns must be positive");
    require(channels == 1 || channels == 3, ErrorCode::kConfig, "image: channels must be 1 or 3");
}

Normalized normalize(std::span<const double> embedding) {
    require(!embedding.empty(), ErrorCode::kEmptyInput, "normalize: empty embedding");
    for (double e : embedding)
        require(std::isfinite(e), ErrorCode::kNonFinite, "normalize: non-finite component");
    const auto [lo, hi] = std::minmax_element(embedding.begin(), embedding.end());
    Normalized out;
    out.values.resize(embedding.size(), 0.0);
    if (*hi == *lo) {
        out.degenerate = true;
        return out;
    }
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < embedding.size(); ++i) out.values[i] = (embedding[i] - *lo) / range;
    return out;
}

std::vector<std::uint8_t> scale_quantize(std::span<const double> normalized, Rounding rounding) {
    std::vector<std::uint8_t> out;
    out.reserve(normalized.size());
    for (double v : normalized) {
        double s = std::clamp(v, 0.0, 1.0) * 255.0;
        s = rounding == Rounding::kNearest ? std::round(s) : std::trunc(s);
        out.push_back(static_cast<std::uint8_t>(s));
    }
    return out;
}

PixelImage reshape(std::span<const std::uint8_t> values, const ImageSpec& spec) {
    spec.validate();
    require(values.size() == spec.pixel_count(), ErrorCode::kShapeMismatch,
            "reshape: " + std::to_string(values.size()) + " values do not fill a " +
                std::to_string(spec.rows) + "x" + std::to_string(spec.cols) + "x" +
                std::to_string(spec.channels) + " image");
    PixelImage img{spec, std::vector<std::uint8_t>(spec.pixel_count(), 0)};
    std::size_t k = 0;
    for (std::size_t i = 0; i < spec.rows; ++i)
        for (std::size_t j = 0; j < spec.cols; ++j)
            for (std::size_t c = 0; c < spec.channels; ++c) {
                img.pixels[(i * spec.cols + j) * spec.channels + c] = values[k];
                ++k;
            }
    return img;
}

PixelImage to_image(std::span<const double> embedding, const ImageSpec& spec, Rounding rounding) {
    const Normalized n = normalize(embedding);
    return reshape(scale_quantize(n.values, rounding), spec);
}

void write_image(std::ostream& out, const PixelImage& image) {
    image.spec.validate();
    require(image.pixels.size() == image.spec.pixel_count(), ErrorCode::kShapeMismatch,
            "write_image: pixel count does not match spec");
    out << (image.spec.channels == 1 ? "P5" : "P6") << '\n'
        << image.spec.cols << ' ' << image.spec.rows << '\n'
        << "255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    require(static_cast<bool>(out), ErrorCode::kIo, "write_image: write failed");
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    require(!tok.empty(), ErrorCode::kFormat, "read_image: truncated header");
    // The single whitespace after maxval has been consumed here.
    return tok;
}

std::size_t header_number(std::istream& in) {
    const std::string tok = header_token(in);
    require(std::all_of(tok.begin(), tok.end(), ::isdigit) && tok.size() <= 9, ErrorCode::kFormat,
            "read_image: malformed header value '" + tok + "'");
    return static_cast<std::size_t>(std::stoul(tok));
}

}  // namespace

PixelImage read_image(std::istream& in) {
    const std::string magic = header_token(in);
    require(magic == "P5" || magic == "P6", ErrorCode::kFormat,
            "read_image: unsupported magic '" + magic + "'");
    PixelImage img;
    img.spec.channels = magic == "P5" ? 1 : 3;
    img.spec.cols = header_number(in);
    img.spec.rows = header_number(in);
    const std::size_t maxval = header_number(in);
    require(maxval == 255, ErrorCode::kFormat, "read_image: maxval must be 255");
    img.spec.validate();
    img.pixels.resize(img.spec.pixel_count());
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    require(in.gcount() == static_cast<std::streamsize>(img.pixels.size()), ErrorCode::kFormat,
            "read_image: truncated payload");
    return img;
}

void write_image(const std::filesystem::path& path, const PixelImage& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
    write_image(out, image);
}

PixelImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
    return read_image(in);
}

std::vector<MemoryRow> memory_report(const ImageSpec& spec, const MemoryComparisonInputs& in) {
    spec.validate();
    const double image = static_cast<double>(spec.pixel_count());
    const auto f = static_cast<double>(in.float_bytes);
    const auto tokens = static_cast<double>(in.sequence_tokens);
    auto row = [&](std::string name, double conventional, double reference, std::string note) {
        MemoryRow r;
        r.representation = std::move(name);
        r.conventional_bytes = conventional;
        r.image_bytes = image;
        r.compression_percent = 100.0 * (conventional - image) / conventional;
        r.reference_bytes = reference;
        r.note = std::move(note);
        return r;
    };
    std::vector<MemoryRow> rows;
    rows.push_back(row("plain_text", in.plain_text_bytes, 2123.57, ""));
    const double w2v = tokens * static_cast<double>(in.word2vec_dims) * f;
    rows.push_back(row("word_embedding_word2vec", w2v, 61440.0,
                       "published 61440B disagrees with tokens*dims*4; its 99.92% matches 614400B"));
    rows.push_back(row("word_embedding_bert", tokens * static_cast<double>(in.bert_dims) * f, 1572864.0, ""));
    rows.push_back(row("sequence_embedding", static_cast<double>(in.sequence_embedding_dims) * f, 2048.0, ""));
    rows.push_back(row("rgb_image", image * static_cast<double>(in.rgb_channels), 1536.0, ""));
    return rows;
}

void write_memory_report_csv(std::ostream& out, const std::vector<MemoryRow>& rows) {
    out << "representation,conventional_bytes,image_bytes,compression_percent,reference_bytes,note\n";
    for (const auto& r : rows) {
        out << r.representation << ',' << std::fixed << std::setprecision(2) << r.conventional_bytes << ','
            << r.image_bytes << ',' << std::setprecision(4) << r.compression_percent << ','
            << std::setprecision(2) << r.reference_bytes << ',' << '"' << r.note << '"' << '\n';
    }
    out << std::defaultfloat;
}

}  // namespace texim::imager
