#include <gtest/gtest.h>

#include <sstream>

#include "texim/error.hpp"
#include "texim/imager.hpp"
#include "texim/rng.hpp"

namespace texim::imager {
namespace {

TEST(Normalize, Cases) {
    EXPECT_EQ(normalize(std::vector<double>{2, 4, 6}).values, (std::vector<double>{0, 0.5, 1}));
    const auto flat = normalize(std::vector<double>{3, 3, 3});
    EXPECT_TRUE(flat.degenerate);
    EXPECT_EQ(flat.values, (std::vector<double>{0, 0, 0}));
    EXPECT_THROW(normalize(std::vector<double>{}), Error);
    EXPECT_THROW(normalize(std::vector<double>{1, std::nan("")}), Error);
}

TEST(Normalize, SpansUnitInterval) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> e(1 + rng.index(40) + 1);
        for (auto& v : e) v = rng.normal() * 5;
        const auto n = normalize(e).values;
        EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
        EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
    }
}

TEST(ScaleQuantize, Endpoints) {
    EXPECT_EQ(scale_quantize(std::vector<double>{1.0, 0.0, 0.5}), (std::vector<std::uint8_t>{255, 0, 127}));
    EXPECT_EQ(scale_quantize(std::vector<double>{0.5}, Rounding::kNearest), (std::vector<std::uint8_t>{128}));
}

TEST(ScaleQuantize, BoundAndOrderProperty) {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> e(64);
        for (auto& v : e) v = rng.normal();
        const auto n = normalize(e).values;
        const auto q = scale_quantize(n);
        for (std::size_t i = 0; i < e.size(); ++i) {
            EXPECT_LE(std::abs(q[i] / 255.0 - n[i]), 1.0 / 255.0);
            for (std::size_t j = 0; j < e.size(); ++j)
                if (e[i] <= e[j]) EXPECT_LE(q[i], q[j]);
        }
    }
}

TEST(ScaleQuantize, ManyToOneWitness) {
    const std::vector<double> a{0.0, 0.5, 1.0}, b{0.0, 0.5001, 1.0};
    EXPECT_NE(a, b);
    EXPECT_EQ(to_image(a, {1, 3, 1}), to_image(b, {1, 3, 1}));
}

TEST(Reshape, RowMajorFill) {
    const std::vector<std::uint8_t> v{0, 1, 2, 3, 4, 5};
    const auto img = reshape(v, {2, 3, 1});
    EXPECT_EQ(img.at(0, 0), 0);
    EXPECT_EQ(img.at(0, 2), 2);
    EXPECT_EQ(img.at(1, 0), 3);
    EXPECT_EQ(img.at(1, 2), 5);
}

TEST(Reshape, SpecMustMatch) {
    const std::vector<std::uint8_t> v(512, 7);
    EXPECT_EQ(reshape(v, {32, 16, 1}).pixels.size(), 512u);
    EXPECT_THROW(reshape(v, {16, 16, 1}), Error);
    EXPECT_THROW(ImageSpec({4, 4, 2}).validate(), Error);
}

TEST(Reshape, FlattenIdentity) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const ImageSpec spec{1 + rng.index(6), 1 + rng.index(6), rng.index(2) ? 3u : 1u};
        std::vector<std::uint8_t> v(spec.pixel_count());
        for (auto& p : v) p = static_cast<std::uint8_t>(rng.index(256));
        const auto img = reshape(v, spec);
        EXPECT_EQ(reshape(img.pixels, spec), img);
    }
}

TEST(ImageFile, PgmPayloadSize) {
    std::vector<double> e(512);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::sin(static_cast<double>(i));
    std::stringstream ss;
    write_image(ss, to_image(e, {32, 16, 1}));
    const std::string header = "P5\n16 32\n255\n";
    EXPECT_EQ(ss.str().substr(0, header.size()), header);
    EXPECT_EQ(ss.str().size() - header.size(), 512u);
}

TEST(ImageFile, PpmPayloadSize) {
    std::stringstream ss;
    write_image(ss, reshape(std::vector<std::uint8_t>(1536, 9), {32, 16, 3}));
    const std::string header = "P6\n16 32\n255\n";
    EXPECT_EQ(ss.str().substr(0, header.size()), header);
    EXPECT_EQ(ss.str().size() - header.size(), 1536u);
}

TEST(ImageFile, RoundTripProperty) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const ImageSpec spec{1 + rng.index(40), 1 + rng.index(40), rng.index(2) ? 3u : 1u};
        std::vector<std::uint8_t> v(spec.pixel_count());
        for (auto& p : v) p = static_cast<std::uint8_t>(rng.index(256));
        const auto img = reshape(v, spec);
        std::stringstream ss;
        write_image(ss, img);
        const std::string bytes = ss.str();
        EXPECT_EQ(read_image(ss), img);
        std::stringstream again;
        write_image(again, read_image(*std::make_unique<std::stringstream>(bytes)));
        EXPECT_EQ(again.str(), bytes);
    }
}

TEST(ImageFile, MalformedInputs) {
    for (const std::string bad : {"P2\n1 1\n255\nx", "P5\n2 2\n65535\n", "P5\n2 2\n255\nabc", "P5\n0 2\n255\n", "junk"}) {
        std::stringstream ss(bad);
        EXPECT_THROW(read_image(ss), Error) << bad;
    }
    std::stringstream comment("P5\n# made by hand\n2 1\n255\nab");
    const auto img = read_image(comment);
    EXPECT_EQ(img.spec, (ImageSpec{1, 2, 1}));
    EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{'a', 'b'}));
}

TEST(MemoryReport, ReferenceRows) {
    const auto rows = memory_report({32, 16, 1});
    ASSERT_EQ(rows.size(), 5u);
    auto find = [&](const std::string& name) {
        for (const auto& r : rows)
            if (r.representation == name) return r;
        ADD_FAILURE() << name;
        return MemoryRow{};
    };
    const auto seq = find("sequence_embedding");
    EXPECT_EQ(seq.conventional_bytes, 2048.0);
    EXPECT_EQ(seq.image_bytes, 512.0);
    EXPECT_DOUBLE_EQ(seq.compression_percent, 75.0);
    EXPECT_NEAR(find("plain_text").compression_percent, 75.89, 0.01);
    const auto w2v = find("word_embedding_word2vec");
    EXPECT_EQ(w2v.conventional_bytes, 614400.0);
    EXPECT_EQ(w2v.reference_bytes, 61440.0);
    EXPECT_FALSE(w2v.note.empty());
    EXPECT_EQ(find("word_embedding_bert").conventional_bytes, 512.0 * 768 * 4);
    std::ostringstream csv;
    write_memory_report_csv(csv, rows);
    const std::string text = csv.str();
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), rows.size() + 1);
}

}  // namespace
}  // namespace texim::imager
