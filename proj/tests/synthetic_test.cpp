#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "energetext/classify.hpp"
#include "energetext/corpus.hpp"
#include "energetext/stemmer.hpp"
#include "energetext/synthetic.hpp"

using namespace energetext;

TEST_SUITE("synthetic") {
  TEST_CASE("pseudo-words survive preprocessing unchanged") {
    const auto words = synthetic::pseudo_words(300, 4);
    CHECK(std::set<std::string>(words.begin(), words.end()).size() == 300);
    for (const auto& w : words) {
      const auto p = preprocess_document(RawDocument{"w", "", w, std::nullopt}, default_stoplist(), default_synonyms());
      CHECK(p.tokens == std::vector<std::string>{w});
    }
    CHECK(synthetic::pseudo_words(20, 4) == std::vector<std::string>(words.begin(), words.begin() + 20));
  }

  TEST_CASE("topic corpus has disjoint vocabularies") {
    const auto tc = synthetic::make_topic_corpus({}, 2);
    CHECK(tc.docs.size() == 200);
    REQUIRE(tc.topic_words.size() == 2);
    for (const auto& w : tc.topic_words[0])
      CHECK(std::find(tc.topic_words[1].begin(), tc.topic_words[1].end(), w) == tc.topic_words[1].end());
    // With purity 1 every token of a document comes from its own topic.
    for (std::size_t d = 0; d < tc.docs.size(); ++d) {
      const auto& own = tc.topic_words[tc.doc_topic[d]];
      std::istringstream in(tc.docs[d].text);
      std::string w;
      std::size_t n = 0;
      while (in >> w) {
        CHECK(std::find(own.begin(), own.end(), w) != own.end());
        ++n;
      }
      CHECK(n == 50);
    }
  }

  TEST_CASE("cooccurrence corpus shape") {
    const auto docs = synthetic::make_cooccurrence_corpus(1);
    CHECK(docs.size() == 550);
    std::size_t alpha = 0, beta = 0;
    for (const auto& d : docs) {
      alpha += d.text.find(" alpha ") != std::string::npos;
      beta += d.text.find(" beta ") != std::string::npos;
    }
    CHECK(alpha == 250);
    CHECK(beta == 250);
  }

  TEST_CASE("labeled abstracts are balanced and keyword-noisy") {
    const auto docs = synthetic::make_labeled_abstracts({}, 5);
    CHECK(docs.size() == 200);
    std::map<std::string, int> per;
    for (const auto& d : docs) {
      REQUIRE(d.label.has_value());
      ++per[*d.label];
    }
    CHECK(per.size() == 4);
    for (const auto& [_, n] : per) CHECK(n == 50);
    const double acc = baseline_accuracy(docs);
    CHECK(acc > 0.35);
    CHECK(acc < 0.7);
  }

  TEST_CASE("memorization sentences are distinct") {
    const auto s = synthetic::memorization_sentences();
    CHECK(s.size() == 8);
    CHECK(std::set<std::string>(s.begin(), s.end()).size() == 8);
  }
}
