#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <cctype>
#include <set>

#include "texim/corpus.hpp"
#include "texim/error.hpp"

namespace texim::corpus {
namespace {

std::vector<RawDocument> numbered_docs(std::size_t n) {
    std::vector<RawDocument> docs;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string tag(1, static_cast<char>('a' + i % 26));
        docs.push_back({"d" + std::to_string(i), "body " + tag + std::to_string(i), "summary " + tag + tag});
    }
    return docs;
}

TEST(CleanText, StandardizesWhitespace) { EXPECT_EQ(clean_text("Hello\n\tWorld"), "Hello World"); }

TEST(CleanText, RemovesUrls) {
    EXPECT_EQ(clean_text("Visit https://a.b/c now"), "Visit now");
    EXPECT_EQ(clean_text("see www.example.org or http://x.y"), "see or");
}

TEST(CleanText, RemovesNonAsciiDigitsAndPunctuation) { EXPECT_EQ(clean_text("Café 123, ok!"), "Caf ok"); }

TEST(CleanText, LowercaseOption) { EXPECT_EQ(clean_text("Hello World", {true}), "hello world"); }

TEST(CleanText, MayBecomeEmpty) {
    EXPECT_EQ(clean_text(""), "");
    EXPECT_EQ(clean_text("123 !!! \n https://x.y"), "");
}

TEST(CleanText, Idempotent) {
    const std::vector<std::string> samples{"Hello\n\tWorld", "a  b   c", "Visit https://a.b/c now!!", "Café 123, ok!",
                                           " leading and trailing ", "x1y2z3", "tab\tseparated\tvalues"};
    for (const auto& s : samples) {
        const auto once = clean_text(s);
        EXPECT_EQ(clean_text(once), once) << s;
        for (char ch : once) EXPECT_TRUE(std::isalpha(static_cast<unsigned char>(ch)) || ch == ' ');
        EXPECT_EQ(once.find("  "), std::string::npos);
    }
}

TEST(BuildStsPairs, HalfShuffledOfFour) {
    const auto docs = numbered_docs(4);
    const auto pairs = build_sts_pairs(docs, 0.5, 7);
    ASSERT_EQ(pairs.size(), 4u);
    int zeros = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        EXPECT_EQ(pairs[i].text_a, clean_text(docs[i].body));
        if (pairs[i].label == 0) {
            ++zeros;
            EXPECT_NE(pairs[i].text_b, clean_text(*docs[i].summary));
        } else {
            EXPECT_EQ(pairs[i].text_b, clean_text(*docs[i].summary));
        }
    }
    EXPECT_EQ(zeros, 2);
}

TEST(BuildStsPairs, RatioZeroKeepsAlignment) {
    const auto docs = numbered_docs(5);
    for (const auto& p : build_sts_pairs(docs, 0.0, 1)) EXPECT_EQ(p.label, 1);
}

TEST(BuildStsPairs, FloorCountAndNoFixedPoints) {
    for (std::size_t n : {2u, 3u, 7u, 20u, 33u}) {
        for (double r : {0.1, 0.5, 0.75, 1.0}) {
            const auto docs = numbered_docs(n);
            const auto pairs = build_sts_pairs(docs, r, n * 31);
            const auto expected = static_cast<std::size_t>(std::floor(r * static_cast<double>(n)));
            std::size_t zeros = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (pairs[i].label == 0) {
                    ++zeros;
                    EXPECT_NE(pairs[i].text_b, clean_text(*docs[i].summary));
                }
            }
            EXPECT_EQ(zeros, expected) << "n=" << n << " r=" << r;
        }
    }
}

TEST(BuildStsPairs, Deterministic) {
    const auto docs = numbered_docs(12);
    const auto a = build_sts_pairs(docs, 0.5, 99);
    const auto b = build_sts_pairs(docs, 0.5, 99);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].text_b, b[i].text_b);
        EXPECT_EQ(a[i].label, b[i].label);
    }
}

TEST(BuildStsPairs, Errors) {
    EXPECT_THROW(build_sts_pairs(numbered_docs(1), 0.5, 1), Error);
    auto docs = numbered_docs(3);
    docs[1].summary.reset();
    EXPECT_THROW(build_sts_pairs(docs, 0.5, 1), Error);
    EXPECT_THROW(build_sts_pairs(numbered_docs(3), 1.5, 1), Error);
}

std::vector<StsPair> numbered_pairs(std::size_t n) {
    std::vector<StsPair> pairs;
    for (std::size_t i = 0; i < n; ++i) pairs.push_back({"a" + std::to_string(i), "b", static_cast<int>(i % 2)});
    return pairs;
}

TEST(Split, ThreeWaySizes) {
    const auto s = split(numbered_pairs(100), {0.7, 0.15, 0.15}, 3);
    EXPECT_EQ(s.train.size(), 70u);
    EXPECT_EQ(s.validation.size(), 15u);
    EXPECT_EQ(s.test.size(), 15u);
}

TEST(Split, TwoWaySizes) {
    const auto s = split(numbered_pairs(10), {0.8, 0.2}, 3);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.validation.size(), 2u);
    EXPECT_TRUE(s.test.empty());
}

TEST(Split, PartitionAndDeterminism) {
    for (std::size_t n : {1u, 7u, 13u, 101u}) {
        const auto a = split(numbered_pairs(n), {0.7, 0.15, 0.15}, n);
        const auto b = split(numbered_pairs(n), {0.7, 0.15, 0.15}, n);
        std::multiset<std::string> seen;
        for (const auto* part : {&a.train, &a.validation, &a.test})
            for (const auto& p : *part) seen.insert(p.text_a);
        EXPECT_EQ(seen.size(), n);
        EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), n);
        ASSERT_EQ(a.train.size(), b.train.size());
        for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].text_a, b.train[i].text_a);
        EXPECT_LE(std::abs(static_cast<double>(a.train.size()) - 0.7 * static_cast<double>(n)), 1.0);
    }
}

TEST(Split, Errors) {
    EXPECT_THROW(split({}, {0.7, 0.15, 0.15}, 1), Error);
    EXPECT_THROW(split(numbered_pairs(5), {0.7, 0.2}, 1), Error);
}

class CorpusFiles : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("texim_corpus_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        std::filesystem::remove_all(dir_);
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::filesystem::path dir_;
};

TEST_F(CorpusFiles, PairsRoundTrip) {
    const std::vector<StsPair> pairs{{"one two", "three", 1}, {"four", "five six", 0}};
    write_pairs_tsv(dir_ / "p.tsv", pairs);
    const auto back = read_pairs_tsv(dir_ / "p.tsv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].text_b, "five six");
    EXPECT_EQ(back[1].label, 0);
}

TEST_F(CorpusFiles, DocumentsRoundTrip) {
    std::vector<RawDocument> docs{{"x", "body one", std::string("sum")}, {"y", "body two", std::nullopt}};
    write_documents_jsonl(dir_ / "d.jsonl", docs);
    const auto back = read_documents_jsonl(dir_ / "d.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].summary, std::optional<std::string>("sum"));
    EXPECT_FALSE(back[1].summary.has_value());
}

TEST_F(CorpusFiles, MalformedInputs) {
    {
        std::ofstream(dir_ / "bad.tsv") << "only one field\n";
    }
    EXPECT_THROW(read_pairs_tsv(dir_ / "bad.tsv"), Error);
    {
        std::ofstream(dir_ / "bad.jsonl") << "{\"id\": 1}\n";
    }
    EXPECT_THROW(read_documents_jsonl(dir_ / "bad.jsonl"), Error);
    EXPECT_THROW(read_lines(dir_ / "missing.txt"), Error);
}

TEST_F(CorpusFiles, ReadLinesKeepsBlanks) {
    {
        std::ofstream(dir_ / "l.txt") << "a\n\nb\n";
    }
    EXPECT_EQ(read_lines(dir_ / "l.txt"), (std::vector<std::string>{"a", "", "b"}));
}

}  // namespace
}  // namespace texim::corpus
