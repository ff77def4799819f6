#include "energetext/synthetic.hpp"

#include <set>
#include <sstream>

#include "energetext/common.hpp"
#include "energetext/rng.hpp"
#include "energetext/stemmer.hpp"

namespace energetext::synthetic {

std::vector<std::string> pseudo_words(std::size_t n, std::uint64_t seed) {
  static constexpr std::string_view kConsonants = "bdfgklmnprtvz";
  static constexpr std::string_view kVowels = "aeiou";
  static constexpr std::string_view kFinal = "aio";
  Rng rng(derive_seed(seed, "synthetic:words"));
  const auto& stop = default_stoplist();
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    for (int s = 0; s < 3; ++s) {
      w += kConsonants[rng.below(kConsonants.size())];
      w += s == 2 ? kFinal[rng.below(kFinal.size())] : kVowels[rng.below(kVowels.size())];
    }
    if (stop.count(w) || stem(w) != w || !seen.insert(w).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string doc_id(std::string_view prefix, std::size_t i) {
  std::ostringstream s;
  s << prefix;
  s.width(4);
  s.fill('0');
  s << i;
  return s.str();
}

}  // namespace

TopicCorpus make_topic_corpus(const TopicCorpusOptions& o, std::uint64_t seed) {
  require(o.num_topics >= 1 && o.documents >= 1 && o.doc_length >= 1, "topic corpus needs topics, documents and length");
  require(o.words_per_topic >= 10, "each topic needs at least 10 words");
  require(o.purity >= 0.0 && o.purity <= 1.0, "purity must lie in [0, 1]");
  const auto words = pseudo_words(o.num_topics * o.words_per_topic, seed);
  TopicCorpus out;
  // Head words weigh 1.0 down to 0.55, tail words 0.1 each.
  std::vector<double> weights(o.words_per_topic);
  for (std::size_t r = 0; r < weights.size(); ++r) weights[r] = r < 10 ? 1.0 - 0.05 * static_cast<double>(r) : 0.1;
  for (std::size_t k = 0; k < o.num_topics; ++k)
    out.topic_words.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(k * o.words_per_topic),
                                 words.begin() + static_cast<std::ptrdiff_t>((k + 1) * o.words_per_topic));

  Rng rng(derive_seed(seed, "synthetic:topics"));
  for (std::size_t d = 0; d < o.documents; ++d) {
    const std::size_t topic = d % o.num_topics;
    std::vector<std::string> tokens;
    for (std::size_t t = 0; t < o.doc_length; ++t) {
      std::size_t k = topic;
      if (o.num_topics > 1 && !rng.bernoulli(o.purity)) k = (topic + 1 + rng.below(o.num_topics - 1)) % o.num_topics;
      tokens.push_back(out.topic_words[k][rng.categorical(weights)]);
    }
    out.docs.push_back(RawDocument{doc_id("topic", d), "synthetic", join(tokens), std::nullopt});
    out.doc_topic.push_back(topic);
  }
  return out;
}

std::vector<RawDocument> make_cooccurrence_corpus(std::uint64_t seed) {
  const auto words = pseudo_words(24, derive_seed(seed, "cooccurrence"));
  const std::vector<std::string> shared(words.begin(), words.begin() + 8);
  const std::vector<std::string> other(words.begin() + 8, words.begin() + 16);
  const std::vector<std::string> centers(words.begin() + 16, words.end());
  Rng rng(derive_seed(seed, "synthetic:cooccurrence"));
  std::vector<RawDocument> docs;
  for (std::size_t i = 0; i < 500; ++i) {
    const std::string& center = i % 2 == 0 ? std::string("alpha") : std::string("beta");
    const std::string text = shared[rng.below(shared.size())] + " " + center + " " + shared[rng.below(shared.size())];
    docs.push_back(RawDocument{doc_id("pair", i), "synthetic", text, std::nullopt});
  }
  for (std::size_t i = 0; i < 50; ++i) {
    const std::string text = other[rng.below(other.size())] + " " + centers[i % centers.size()] + " " +
                             other[rng.below(other.size())];
    docs.push_back(RawDocument{doc_id("filler", i), "synthetic", text, std::nullopt});
  }
  return docs;
}

std::vector<RawDocument> make_labeled_abstracts(const AbstractOptions& o, std::uint64_t seed) {
  require(o.per_class >= 1 && o.length >= 1, "abstracts need members and length");
  require(o.keyword_right >= 0.0 && o.keyword_wrong >= 0.0 && o.keyword_right + o.keyword_wrong <= 1.0,
          "keyword shares must be a valid split");
  static const char* kKeywords[] = {"characterization", "modeling", "processing", "synthesis"};
  const auto words = pseudo_words(kNumAbstractClasses * o.class_words + o.common_words, derive_seed(seed, "abstracts"));
  std::vector<std::vector<std::string>> vocab;
  for (int c = 0; c < kNumAbstractClasses; ++c)
    vocab.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(c * o.class_words),
                       words.begin() + static_cast<std::ptrdiff_t>((c + 1) * o.class_words));
  const std::vector<std::string> common(words.begin() + static_cast<std::ptrdiff_t>(kNumAbstractClasses * o.class_words),
                                        words.end());

  Rng rng(derive_seed(seed, "synthetic:abstracts"));
  std::vector<RawDocument> docs;
  for (std::size_t i = 0; i < o.per_class * kNumAbstractClasses; ++i) {
    const int cls = static_cast<int>(i % kNumAbstractClasses);
    std::vector<std::string> tokens;
    const double u = rng.uniform();
    if (u < o.keyword_right) {
      tokens.push_back(kKeywords[cls]);
    } else if (u < o.keyword_right + o.keyword_wrong) {
      tokens.push_back(kKeywords[(cls + 1 + static_cast<int>(rng.below(kNumAbstractClasses - 1))) % kNumAbstractClasses]);
    }
    while (tokens.size() < o.length) {
      const auto& pool = rng.bernoulli(o.class_share) ? vocab[static_cast<std::size_t>(cls)] : common;
      tokens.push_back(pool[rng.below(pool.size())]);
    }
    docs.push_back(RawDocument{doc_id("abstract", i), "synthetic", join(tokens),
                               std::string(to_string(abstract_class_from_code(cls)))});
  }
  return docs;
}

std::vector<std::string> memorization_sentences() {
  return {
      "the crystal density of rdx was measured by xray diffraction",
      "small scale impact tests rank hmx as more sensitive than tatb",
      "a reactive force field predicts the detonation velocity of petn",
      "ammonium perchlorate burns faster when mixed with fine aluminum",
      "cocrystals of cl20 and tnt show reduced friction sensitivity",
      "additive manufacturing allows printed grains with complex geometry",
      "nitration of the precursor yields the target nitramine in one pot",
      "thermal decomposition of nto releases nitrogen dioxide early",
  };
}

}  // namespace energetext::synthetic
