#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "texim/corpus.hpp"

namespace texim::testing {

// Pronounceable lowercase word for an index; distinct indices give
// distinct words.
std::string synthetic_word(std::size_t index);

// Topic-structured documents: every topic owns a few keywords, bodies are
// long mixtures of keywords and shared filler words, summaries are a few
// keywords of the same topic.
struct TopicCorpusOptions {
    std::size_t documents = 500;
    std::size_t topics = 32;
    std::size_t keywords_per_topic = 3;
    std::size_t fillers = 40;
    std::size_t body_min = 20;
    std::size_t body_max = 40;
    std::size_t summary_min = 3;
    std::size_t summary_max = 5;
    double body_keyword_rate = 0.4;
    std::uint64_t seed = 1;
};

std::vector<corpus::RawDocument> topic_documents(const TopicCorpusOptions& options);

// Sentences over a fixed word list with lengths in [min_words, max_words].
std::vector<std::string> random_sentences(std::size_t count, std::size_t words, std::size_t min_words,
                                          std::size_t max_words, std::uint64_t seed);

}  // namespace texim::testing
