#include "texim/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "texim/error.hpp"

namespace texim::tokenizer {

namespace {

std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        const std::size_t start = i;
        while (i < text.size() && text[i] != ' ') ++i;
        if (i > start) words.push_back(text.substr(start, i - start));
    }
    return words;
}

std::string strip_marker(std::string_view s) {
    if (s.substr(0, kContinuation.size()) == kContinuation) s.remove_prefix(kContinuation.size());
    return std::string(s);
}

// Merging "a" with "##b" gives "ab"; "##a" with "##b" gives "##ab".
std::string merge_symbols(const std::string& left, const std::string& right) {
    return left + strip_marker(right);
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> subwords) {
    for (auto& s : subwords) {
        require(!s.empty(), ErrorCode::kInvalidArgument, "vocabulary: empty subword");
        require(s.find_first_of("\t\n") == std::string::npos, ErrorCode::kInvalidArgument,
                "vocabulary: subword contains tab or newline");
        if (s == kUnknown) continue;
        const long id = static_cast<long>(by_id_.size()) + 1;
        require(ids_.emplace(s, id).second, ErrorCode::kInvalidArgument, "vocabulary: duplicate subword " + s);
        by_id_.push_back(std::move(s));
    }
    by_id_.emplace_back(kUnknown);
    ids_.emplace(std::string(kUnknown), static_cast<long>(by_id_.size()));
}

bool Vocabulary::contains(std::string_view subword) const { return ids_.count(std::string(subword)) > 0; }

long Vocabulary::id(std::string_view subword) const {
    auto it = ids_.find(std::string(subword));
    return it == ids_.end() ? 0 : it->second;
}

const std::string& Vocabulary::subword(long id) const {
    require(id >= 1 && static_cast<std::size_t>(id) <= by_id_.size(), ErrorCode::kInvalidArgument,
            "vocabulary: id " + std::to_string(id) + " out of range");
    return by_id_[static_cast<std::size_t>(id - 1)];
}

void Vocabulary::write(std::ostream& out) const {
    for (std::size_t i = 0; i < by_id_.size(); ++i) out << by_id_[i] << '\t' << (i + 1) << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
    std::vector<std::string> subwords;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        require(tab != std::string::npos && tab > 0, ErrorCode::kFormat,
                "vocabulary line " + std::to_string(lineno) + ": expected subword<TAB>id");
        long id = 0;
        try {
            id = std::stol(line.substr(tab + 1));
        } catch (const std::exception&) {
            fail(ErrorCode::kFormat, "vocabulary line " + std::to_string(lineno) + ": bad id");
        }
        require(id == static_cast<long>(subwords.size()) + 1, ErrorCode::kFormat,
                "vocabulary line " + std::to_string(lineno) + ": ids must be consecutive from 1");
        subwords.push_back(line.substr(0, tab));
    }
    require(!subwords.empty() && subwords.back() == kUnknown, ErrorCode::kFormat,
            "vocabulary: last entry must be the unknown token");
    return Vocabulary(std::move(subwords));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
    write(out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
    return read(in);
}

Vocabulary train_vocab(const std::vector<std::string>& corpus, std::size_t target_size) {
    require(!corpus.empty(), ErrorCode::kEmptyInput, "train_vocab: empty corpus");

    std::map<std::string, long> word_counts;
    for (const auto& text : corpus)
        for (auto w : split_words(text)) ++word_counts[std::string(w)];
    require(!word_counts.empty(), ErrorCode::kEmptyInput, "train_vocab: corpus has no words");

    struct Word {
        std::vector<std::string> symbols;
        long count;
    };
    std::vector<Word> words;
    std::set<std::string> alphabet;
    for (const auto& [w, c] : word_counts) {
        Word word{{}, c};
        for (std::size_t i = 0; i < w.size(); ++i) {
            word.symbols.push_back(i == 0 ? std::string(1, w[i]) : std::string(kContinuation) + w[i]);
            alphabet.insert(word.symbols.back());
        }
        words.push_back(std::move(word));
    }

    std::vector<std::string> vocab(alphabet.begin(), alphabet.end());
    require(target_size >= vocab.size() + 1, ErrorCode::kInvalidArgument,
            "train_vocab: target size " + std::to_string(target_size) + " is below the " +
                std::to_string(vocab.size()) + " base symbols plus the unknown token");
    std::set<std::string> known(vocab.begin(), vocab.end());

    using Pair = std::pair<std::string, std::string>;
    std::map<Pair, long> pair_counts;
    std::map<Pair, std::set<std::size_t>> occurs_in;
    auto count_pairs = [&](std::size_t index, long sign) {
        const auto& w = words[index];
        for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
            const Pair pair{w.symbols[i], w.symbols[i + 1]};
            auto it = pair_counts.emplace(pair, 0).first;
            it->second += sign * w.count;
            if (it->second == 0) pair_counts.erase(it);
            if (sign > 0) occurs_in[pair].insert(index);
        }
    };
    for (std::size_t i = 0; i < words.size(); ++i) count_pairs(i, 1);

    while (vocab.size() + 1 < target_size && !pair_counts.empty()) {
        const Pair* best = nullptr;
        long best_count = 0;
        std::size_t best_len = 0;
        for (const auto& [pair, count] : pair_counts) {
            const std::size_t len = strip_marker(pair.first).size() + strip_marker(pair.second).size();
            // map iteration is lexicographic, so strict comparisons keep the
            // smallest pair among ties.
            if (count > best_count || (count == best_count && len < best_len)) {
                best = &pair;
                best_count = count;
                best_len = len;
            }
        }
        const auto [left, right] = *best;
        const std::string merged = merge_symbols(left, right);
        const auto affected = occurs_in[{left, right}];
        occurs_in.erase({left, right});
        for (std::size_t index : affected) {
            count_pairs(index, -1);
            auto& w = words[index];
            std::vector<std::string> next;
            next.reserve(w.symbols.size());
            for (std::size_t i = 0; i < w.symbols.size(); ++i) {
                if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
                    next.push_back(merged);
                    ++i;
                } else {
                    next.push_back(w.symbols[i]);
                }
            }
            w.symbols = std::move(next);
            count_pairs(index, 1);
        }
        if (known.insert(merged).second) vocab.push_back(merged);
    }
    return Vocabulary(std::move(vocab));
}

Mask TokenSequence::mask() const {
    Mask m(ids.size(), 0);
    for (std::size_t i = 0; i < true_length && i < ids.size(); ++i) m[i] = 1;
    return m;
}

std::vector<std::string> segment_word(std::string_view word, const Vocabulary& vocab) {
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start < word.size()) {
        std::size_t end = word.size();
        std::string found;
        while (end > start) {
            std::string candidate = (start == 0 ? std::string() : std::string(kContinuation)) +
                                    std::string(word.substr(start, end - start));
            if (vocab.contains(candidate)) {
                found = std::move(candidate);
                break;
            }
            --end;
        }
        if (found.empty()) return {std::string(kUnknown)};
        pieces.push_back(std::move(found));
        start = end;
    }
    return pieces;
}

TokenSequence pad_ids(const std::vector<long>& ids, std::size_t length) {
    require(length >= 1, ErrorCode::kInvalidArgument, "tokenize: sequence length must be >= 1");
    require(!ids.empty(), ErrorCode::kEmptyInput, "tokenize: empty token list");
    TokenSequence seq;
    seq.true_length = std::min(ids.size(), length);
    seq.ids.assign(ids.begin(), ids.begin() + static_cast<long>(seq.true_length));
    seq.ids.resize(length, kPadId);
    return seq;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t length) {
    std::vector<long> ids;
    for (auto word : split_words(text)) {
        for (const auto& piece : segment_word(word, vocab)) ids.push_back(vocab.id(piece));
        if (ids.size() >= length) break;
    }
    require(!ids.empty(), ErrorCode::kEmptyInput, "tokenize: text is empty");
    return pad_ids(ids, length);
}

std::string detokenize(const TokenSequence& tokens, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < tokens.true_length; ++i) {
        const std::string& piece = vocab.subword(tokens.ids[i]);
        if (piece.substr(0, kContinuation.size()) == kContinuation) {
            out += piece.substr(kContinuation.size());
        } else {
            if (!out.empty()) out.push_back(' ');
            out += piece;
        }
    }
    return out;
}

}  // namespace texim::tokenizer
