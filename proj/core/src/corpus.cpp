#include "texim/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace texim::corpus {

namespace {

bool starts_with_ci(std::string_view text, std::size_t pos, std::string_view prefix) {
    if (text.size() - pos < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[pos + i])) != prefix[i]) return false;
    }
    return true;
}

bool is_space(char c) { return c == ' '; }

std::string strip_urls(std::string_view text) {
    static constexpr std::string_view kPrefixes[] = {"http://", "https://", "www."};
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const bool url = std::any_of(std::begin(kPrefixes), std::end(kPrefixes),
                                     [&](std::string_view p) { return starts_with_ci(text, i, p); });
        if (url) {
            while (i < text.size() && !is_space(text[i])) ++i;
            out.push_back(' ');
            continue;
        }
        out.push_back(text[i++]);
    }
    return out;
}

}  // namespace

std::string clean_text(std::string_view raw, const CleanOptions& options) {
    std::string text(raw);
    for (char& c : text) {
        if (c == '\n' || c == '\r' || c == '\t' || c == '\v' || c == '\f') c = ' ';
    }
    text = strip_urls(text);
    std::erase_if(text, [](char c) { return c >= '0' && c <= '9'; });
    std::erase_if(text, [](char c) { return static_cast<unsigned char>(c) >= 0x80; });
    std::erase_if(text, [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return c != ' ' && !std::isalpha(u);
    });

    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
        out.push_back(options.lowercase ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c);
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<StsPair> build_sts_pairs(const std::vector<RawDocument>& docs, double shuffle_ratio,
                                     std::uint64_t seed, const CleanOptions& options) {
    require(shuffle_ratio >= 0.0 && shuffle_ratio <= 1.0, ErrorCode::kInvalidArgument,
            "build_sts_pairs: shuffle ratio must lie in [0, 1]");
    const std::size_t n = docs.size();
    const auto k = static_cast<std::size_t>(std::floor(shuffle_ratio * static_cast<double>(n) + 1e-9));
    require(!(shuffle_ratio > 0.0 && n < 2), ErrorCode::kInvalidArgument,
            "build_sts_pairs: shuffling needs at least two documents");

    std::vector<std::string> bodies, summaries;
    bodies.reserve(n);
    summaries.reserve(n);
    for (const auto& d : docs) {
        require(d.summary.has_value(), ErrorCode::kInvalidArgument,
                "build_sts_pairs: document '" + d.id + "' has no summary");
        bodies.push_back(clean_text(d.body, options));
        summaries.push_back(clean_text(*d.summary, options));
        require(!bodies.back().empty() && !summaries.back().empty(), ErrorCode::kEmptyInput,
                "build_sts_pairs: document '" + d.id + "' is empty after cleaning");
    }

    std::vector<std::size_t> source(n);
    std::iota(source.begin(), source.end(), 0);
    std::vector<int> labels(n, 1);
    if (k > 0) {
        Rng rng = Rng::derive(seed, 0x5a1f);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<long>(k));
        std::sort(chosen.begin(), chosen.end());
        if (k == 1) {
            // A single shuffled pair borrows from any other document.
            std::size_t other = rng.index(n - 1);
            if (other >= chosen[0]) ++other;
            source[chosen[0]] = other;
        } else {
            // Sattolo's algorithm yields a single cycle, hence no fixed points.
            std::vector<std::size_t> perm = chosen;
            for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i)]);
            for (std::size_t i = 0; i < k; ++i) source[chosen[i]] = perm[i];
        }
        for (std::size_t idx : chosen) labels[idx] = 0;
    }

    std::vector<StsPair> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pairs.push_back({bodies[i], summaries[source[i]], labels[i]});
    return pairs;
}

std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double>& ratios) {
    require(!ratios.empty(), ErrorCode::kInvalidArgument, "split: no ratios given");
    double total = 0.0;
    for (double r : ratios) {
        require(r >= 0.0, ErrorCode::kInvalidArgument, "split: negative ratio");
        total += r;
    }
    require(std::abs(total - 1.0) < 1e-6, ErrorCode::kInvalidArgument, "split: ratios must sum to 1");
    std::vector<std::size_t> sizes;
    std::size_t used = 0;
    for (std::size_t i = 0; i + 1 < ratios.size(); ++i) {
        auto s = static_cast<std::size_t>(std::llround(ratios[i] * static_cast<double>(n)));
        s = std::min(s, n - used);
        sizes.push_back(s);
        used += s;
    }
    sizes.push_back(n - used);
    return sizes;
}

CorpusSplit split(std::vector<StsPair> pairs, const std::vector<double>& ratios, std::uint64_t seed) {
    require(ratios.size() == 2 || ratios.size() == 3, ErrorCode::kInvalidArgument,
            "split: expected two or three ratios");
    auto parts = split_items(std::move(pairs), ratios, seed);
    CorpusSplit out;
    out.seed = seed;
    out.train = std::move(parts[0]);
    out.validation = std::move(parts[1]);
    if (parts.size() == 3) out.test = std::move(parts[2]);
    return out;
}

std::vector<RawDocument> read_documents_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
    std::vector<RawDocument> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::kFormat, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        require(j.is_object() && j.contains("id") && j.contains("body"), ErrorCode::kFormat,
                path.string() + ":" + std::to_string(lineno) + ": expected fields id and body");
        RawDocument d;
        d.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        d.body = j["body"].get<std::string>();
        if (j.contains("summary") && !j["summary"].is_null()) d.summary = j["summary"].get<std::string>();
        require(!d.body.empty(), ErrorCode::kFormat,
                path.string() + ":" + std::to_string(lineno) + ": empty body");
        docs.push_back(std::move(d));
    }
    std::vector<std::string> ids;
    for (const auto& d : docs) ids.push_back(d.id);
    std::sort(ids.begin(), ids.end());
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorCode::kFormat,
            path.string() + ": duplicate document id");
    return docs;
}

void write_documents_jsonl(const std::filesystem::path& path, const std::vector<RawDocument>& docs) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
    for (const auto& d : docs) {
        nlohmann::json j{{"id", d.id}, {"body", d.body}};
        if (d.summary) j["summary"] = *d.summary;
        out << j.dump() << '\n';
    }
}

std::vector<StsPair> read_pairs_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
    std::vector<StsPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        require(t2 != std::string::npos, ErrorCode::kFormat,
                path.string() + ":" + std::to_string(lineno) + ": expected text_a<TAB>text_b<TAB>label");
        const std::string label = line.substr(t2 + 1);
        require(label == "0" || label == "1", ErrorCode::kFormat,
                path.string() + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        pairs.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), label == "1" ? 1 : 0});
    }
    return pairs;
}

void write_pairs_tsv(const std::filesystem::path& path, const std::vector<StsPair>& pairs) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
    for (const auto& p : pairs) {
        require(p.text_a.find('\t') == std::string::npos && p.text_b.find('\t') == std::string::npos,
                ErrorCode::kInvalidArgument, "pair text contains a tab");
        out << p.text_a << '\t' << p.text_b << '\t' << p.label << '\n';
    }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace texim::corpus
