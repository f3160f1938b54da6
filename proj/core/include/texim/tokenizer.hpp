#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "texim/mask.hpp"

namespace texim::tokenizer {

inline constexpr std::string_view kContinuation = "##";
inline constexpr std::string_view kUnknown = "<unk>";
inline constexpr long kPadId = 0;

// Subword lookup table. Ids run 1..size(); id 0 is padding and never
// appears as an entry. The last id is always the unknown token.
class Vocabulary {
public:
    Vocabulary() = default;
    // `subwords` in id order (first gets id 1). The unknown token is
    // appended if absent.
    explicit Vocabulary(std::vector<std::string> subwords);

    std::size_t size() const noexcept { return by_id_.size(); }
    long unknown_id() const noexcept { return static_cast<long>(by_id_.size()); }
    bool contains(std::string_view subword) const;
    // Returns 0 if absent.
    long id(std::string_view subword) const;
    const std::string& subword(long id) const;
    const std::vector<std::string>& subwords() const noexcept { return by_id_; }

    // subword<TAB>id per line, sorted by id.
    void write(std::ostream& out) const;
    static Vocabulary read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.by_id_ == b.by_id_; }

private:
    std::vector<std::string> by_id_;
    std::unordered_map<std::string, long> ids_;
};

// Greedy pair-merge training. Words are split into characters, with every
// non-initial character carrying the "##" marker; the most frequent adjacent
// pair is merged until the vocabulary (including the unknown token) reaches
// `target_size` or no pair remains. Ties go to the pair whose merged surface
// is shorter, then to the lexicographically smaller pair.
Vocabulary train_vocab(const std::vector<std::string>& corpus, std::size_t target_size);

struct TokenSequence {
    std::vector<long> ids;
    std::size_t true_length = 0;

    Mask mask() const;  // true for real tokens
};

// Greedy longest-match segmentation of a single word into subwords (the
// first piece plain, later pieces "##"-prefixed). Returns {unknown} if the
// word has no complete segmentation.
std::vector<std::string> segment_word(std::string_view word, const Vocabulary& vocab);

// Splits `text` on spaces, segments each word, maps to ids, keeps the first
// `length` tokens and right-pads with 0.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t length);

// Pads or truncates an id list to `length`.
TokenSequence pad_ids(const std::vector<long>& ids, std::size_t length);

// Inverse lookup, "##" pieces glued to the previous piece, padding dropped.
std::string detokenize(const TokenSequence& tokens, const Vocabulary& vocab);

}  // namespace texim::tokenizer
