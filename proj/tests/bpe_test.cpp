#include <doctest.h>

#include "energetext/bpe.hpp"
#include "energetext/common.hpp"
#include "energetext/corpus.hpp"
#include "energetext/rng.hpp"
#include "energetext/synthetic.hpp"

using namespace energetext;

namespace {

std::vector<std::string> sentence_corpus(std::size_t n, std::uint64_t seed) {
  const auto words = synthetic::pseudo_words(40, seed);
  const std::vector<std::string> extra{"RDX", "H2O", "1,3,5-TNB", "Shock!", "wave-front", "(NH4)ClO4"};
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 3 + rng.below(10);
    for (std::size_t w = 0; w < len; ++w) {
      if (w) s += rng.bernoulli(0.2) ? "  " : " ";
      s += rng.bernoulli(0.1) ? extra[rng.below(extra.size())] : words[rng.below(words.size())];
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_SUITE("bpe") {
  TEST_CASE("hand-run merges on a four-character corpus") {
    const auto seven = train_bpe({"aaaa"}, 7);
    CHECK(seven.size() == 7);
    CHECK(seven.reached_target());
    REQUIRE(seven.merges().size() == 1);
    CHECK(seven.merges()[0] == std::pair<std::string, std::string>{"a", "a"});
    CHECK(seven.id("aa").has_value());

    const auto eight = train_bpe({"aaaa"}, 8);
    REQUIRE(eight.merges().size() == 2);
    CHECK(eight.merges()[1] == std::pair<std::string, std::string>{"aa", "aa"});
    CHECK(*eight.id("aa") < *eight.id("aaaa"));
    CHECK(eight.encode("aaaa") == std::vector<int>{*eight.id("aaaa")});

    const auto short_of_target = train_bpe({"aaaa"}, 20);
    CHECK_FALSE(short_of_target.reached_target());
    CHECK(short_of_target.size() == 8);
  }

  TEST_CASE("special tokens occupy the first ids") {
    const auto tok = train_bpe(sentence_corpus(50, 1), 120);
    const std::vector<std::string> specials{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    for (int i = 0; i < 5; ++i) CHECK(tok.token(i) == specials[static_cast<std::size_t>(i)]);
    CHECK(tok.id("[MASK]") == BpeTokenizer::kMask);
    for (const auto& s : sentence_corpus(30, 2))
      for (int id : tok.encode(s)) {
        CHECK(id >= 0);
        CHECK(static_cast<std::size_t>(id) < tok.size());
      }
  }

  TEST_CASE("encode then decode restores normalized text") {
    const auto corpus = sentence_corpus(200, 3);
    const auto tok = train_bpe(corpus, 150);
    for (const auto& s : sentence_corpus(100, 4)) CHECK(tok.decode(tok.encode(s)) == normalize_text(s));
    // Characters never seen in training fall back to [UNK].
    const auto ids = tok.encode("qqq");
    CHECK(std::find(ids.begin(), ids.end(), BpeTokenizer::kUnk) != ids.end());
  }

  TEST_CASE("training is deterministic and serializes exactly") {
    const auto corpus = sentence_corpus(100, 5);
    const auto a = train_bpe(corpus, 130);
    const auto b = train_bpe(corpus, 130);
    CHECK(a.merges() == b.merges());
    CHECK(a == b);
    const auto back = tokenizer_from_json(tokenizer_to_json(a));
    CHECK(back == a);
    CHECK(tokenizer_to_json(back) == tokenizer_to_json(a));
    for (const auto& s : corpus) CHECK(back.encode(s) == a.encode(s));
  }

  TEST_CASE("pretokenization keeps leading spaces on words") {
    const auto words = pretokenize("shock wave front");
    REQUIRE(words.size() == 3);
    CHECK(words[0] == "shock");
    CHECK(words[1] == " wave");
    CHECK(words[2] == " front");
  }
}
