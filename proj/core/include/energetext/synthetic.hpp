#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "energetext/corpus.hpp"

namespace energetext::synthetic {

/// n distinct consonant-vowel pseudo-words that pass through preprocessing
/// unchanged (not stopwords, already stems).
std::vector<std::string> pseudo_words(std::size_t n, std::uint64_t seed);

struct TopicCorpusOptions {
  std::size_t documents = 200;
  std::size_t doc_length = 50;
  std::size_t words_per_topic = 30;
  std::size_t num_topics = 2;
  double purity = 1.0;  // chance a token comes from the document's own topic
};

struct TopicCorpus {
  std::vector<RawDocument> docs;
  /// Each topic's vocabulary, most probable first. Vocabularies are disjoint.
  std::vector<std::vector<std::string>> topic_words;
  std::vector<std::size_t> doc_topic;
};

/// Documents cycle through the topics; the first 10 words of each topic carry
/// most of its mass, so the true top-10 is well separated from the tail.
TopicCorpus make_topic_corpus(const TopicCorpusOptions& options, std::uint64_t seed);

/// "p alpha q" and "p beta q" with p, q from one shared pool, plus filler
/// documents built the same way around other centers from a second pool.
/// alpha and beta share every context and nothing else does.
std::vector<RawDocument> make_cooccurrence_corpus(std::uint64_t seed);

struct AbstractOptions {
  std::size_t per_class = 50;
  std::size_t length = 60;
  std::size_t class_words = 25;
  std::size_t common_words = 60;
  double class_share = 0.35;  // share of tokens drawn from the class vocabulary
  double keyword_right = 0.5;  // the correct class keyword opens the abstract
  double keyword_wrong = 0.25;  // a wrong one does; the rest carry none
};

/// Labeled four-class abstracts with class-specific vocabularies.
std::vector<RawDocument> make_labeled_abstracts(const AbstractOptions& options, std::uint64_t seed);

/// Eight short, distinct sentences for memorization runs.
std::vector<std::string> memorization_sentences();

}  // namespace energetext::synthetic
