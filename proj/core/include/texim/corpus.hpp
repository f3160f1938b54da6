#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "texim/error.hpp"
#include "texim/rng.hpp"

namespace texim::corpus {

struct RawDocument {
    std::string id;
    std::string body;
    std::optional<std::string> summary;
};

struct StsPair {
    std::string text_a;
    std::string text_b;
    int label = 0;  // 1 similar, 0 dissimilar
};

struct CorpusSplit {
    std::vector<StsPair> train;
    std::vector<StsPair> validation;
    std::vector<StsPair> test;
    std::uint64_t seed = 0;
};

struct CleanOptions {
    bool lowercase = false;
};

// Removes, in order: line breaks and tabs, URLs (http://, https://, www.
// prefixed runs of non-space characters), digits, non-ASCII bytes and
// punctuation, then collapses whitespace. The result holds only ASCII
// letters separated by single spaces and may be empty.
std::string clean_text(std::string_view raw, const CleanOptions& options = {});

// Each document pairs its cleaned body with a cleaned summary. floor(ratio*n)
// documents, picked by `seed`, receive another document's summary and label
// 0; the remaining pairs keep their own summary with label 1.
std::vector<StsPair> build_sts_pairs(const std::vector<RawDocument>& docs, double shuffle_ratio,
                                     std::uint64_t seed, const CleanOptions& options = {});

// Sizes of a deterministic partition of n items by `ratios` (which must sum
// to 1). Every part but the last gets round(ratio * n); the last takes the
// remainder.
std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double>& ratios);

// Seeded shuffle followed by a partition into split_sizes(n, ratios) parts.
template <typename T>
std::vector<std::vector<T>> split_items(std::vector<T> items, const std::vector<double>& ratios,
                                        std::uint64_t seed) {
    require(!items.empty(), ErrorCode::kEmptyInput, "split: no items to split");
    const auto sizes = split_sizes(items.size(), ratios);
    Rng rng = Rng::derive(seed, 0x5b117);
    rng.shuffle(items);
    std::vector<std::vector<T>> parts;
    std::size_t offset = 0;
    for (std::size_t s : sizes) {
        parts.emplace_back(std::make_move_iterator(items.begin() + static_cast<long>(offset)),
                           std::make_move_iterator(items.begin() + static_cast<long>(offset + s)));
        offset += s;
    }
    return parts;
}

// Two or three ratios (train:validation[:test]).
CorpusSplit split(std::vector<StsPair> pairs, const std::vector<double>& ratios, std::uint64_t seed);

// JSON lines with fields "id", "body" and optional "summary".
std::vector<RawDocument> read_documents_jsonl(const std::filesystem::path& path);
void write_documents_jsonl(const std::filesystem::path& path, const std::vector<RawDocument>& docs);

// Tab-separated text_a<TAB>text_b<TAB>label, one pair per line.
std::vector<StsPair> read_pairs_tsv(const std::filesystem::path& path);
void write_pairs_tsv(const std::filesystem::path& path, const std::vector<StsPair>& pairs);

// One text per line; blank lines are kept as empty strings.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace texim::corpus
