#include <doctest.h>

#include <cmath>

#include "energetext/common.hpp"
#include "energetext/corpus.hpp"
#include "energetext/mlm.hpp"
#include "energetext/rng.hpp"
#include "scenarios.hpp"

using namespace energetext;

namespace {

const scenario::Memorized& memorized() {
  static const scenario::Memorized m = scenario::memorize();
  return m;
}

TransformerModel zero_model(const TransformerConfig& c) {
  TransformerModel m(c);
  for (auto& t : m.params())
    if (t.name != "tok_emb") std::fill(t.data.begin(), t.data.end(), 0.0);
  return m;
}

}  // namespace

TEST_SUITE("mlm") {
  TEST_CASE("full masking selects every ordinary position") {
    const std::vector<int> ids{2, 7, 8, 9, 10, 3};
    const auto row = mask_tokens(ids, 1.0, 5, 20);
    CHECK(row.target_ids.front() == -1);
    CHECK(row.target_ids.back() == -1);
    for (std::size_t i = 1; i + 1 < ids.size(); ++i) CHECK(row.target_ids[i] == ids[i]);
    CHECK(row.input_ids.front() == BpeTokenizer::kCls);
    CHECK(row.input_ids.back() == BpeTokenizer::kSep);
  }

  TEST_CASE("masking is seeded and forces one selection") {
    const std::vector<int> ids{2, 7, 8, 3};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto a = mask_tokens(ids, 0.01, seed, 20);
      const auto b = mask_tokens(ids, 0.01, seed, 20);
      CHECK(a.input_ids == b.input_ids);
      CHECK(a.target_ids == b.target_ids);
      CHECK(std::count_if(a.target_ids.begin(), a.target_ids.end(), [](int t) { return t != -1; }) >= 1);
    }
    CHECK_THROWS_AS(mask_tokens({2, 0, 3}, 0.5, 1, 20), Error);
  }

  TEST_CASE("selection rate and replacement mix over 1e5 positions") {
    Rng rng(11);
    const std::size_t C = 40;
    std::size_t positions = 0, selected = 0, masked = 0, random_ok = 0;
    while (positions < 100000) {
      std::vector<int> ids{BpeTokenizer::kCls};
      for (int i = 0; i < 98; ++i) ids.push_back(5 + static_cast<int>(rng.below(C - 5)));
      ids.push_back(BpeTokenizer::kSep);
      const auto row = mask_tokens(ids, 0.15, rng, C);
      for (std::size_t i = 1; i + 1 < ids.size(); ++i) {
        ++positions;
        if (row.target_ids[i] == -1) {
          CHECK(row.input_ids[i] == ids[i]);
          continue;
        }
        ++selected;
        if (row.input_ids[i] == BpeTokenizer::kMask) ++masked;
        else random_ok += !BpeTokenizer::is_special(row.input_ids[i]);
      }
    }
    const double share = static_cast<double>(selected) / static_cast<double>(positions);
    CHECK(std::abs(share - 0.15) <= 0.01);
    CHECK(std::abs(static_cast<double>(masked) / static_cast<double>(selected) - 0.8) < 0.02);
    CHECK(random_ok == selected - masked);
  }

  TEST_CASE("sequences are framed windows") {
    const auto sentences = synthetic::memorization_sentences();
    const auto tok = train_bpe(sentences, 60);
    const auto seqs = encode_sequences(tok, sentences, 8);
    std::string rebuilt;
    std::size_t next_text = 0;
    std::string current;
    for (const auto& s : seqs) {
      CHECK(s.size() <= 8);
      CHECK(s.front() == BpeTokenizer::kCls);
      CHECK(s.back() == BpeTokenizer::kSep);
      current += tok.decode(s);
      if (current == normalize_text(sentences[next_text])) {
        ++next_text;
        current.clear();
      }
    }
    CHECK(next_text == sentences.size());
    CHECK(current.empty());
  }

  TEST_CASE("best epoch is the accuracy argmax, earliest on ties") {
    std::vector<EpochMetrics> m{{1, 3.0, 3.0, 50.0}, {2, 2.0, 2.5, 70.0}, {3, 1.0, 2.7, 60.0}};
    CHECK(select_best_epoch(m) == 1);
    m.push_back({4, 0.5, 2.0, 70.0});
    CHECK(select_best_epoch(m) == 1);
    const auto csv = metrics_csv(m);
    CHECK(csv.rfind("epoch,train_loss,val_loss,val_masked_accuracy\n1,", 0) == 0);
  }

  TEST_CASE("all-zero network predicts uniformly over ordinary tokens") {
    TransformerConfig c;
    c.layers = 1;
    c.heads = 2;
    c.d_model = 8;
    c.d_ff = 8;
    c.max_seq = 64;
    c.vocab_size = 25;
    c.batch_size = 64;
    const auto model = zero_model(c);
    Rng rng(12);
    std::vector<std::vector<int>> seqs;
    for (int s = 0; s < 1000; ++s) {
      std::vector<int> ids{BpeTokenizer::kCls};
      for (int i = 0; i < 60; ++i) ids.push_back(5 + static_cast<int>(rng.below(20)));
      ids.push_back(BpeTokenizer::kSep);
      seqs.push_back(ids);
    }
    const auto eval = evaluate_masked(model, seqs, 0.15, 3);
    const double p = 1.0 / 20.0;
    const double se = 100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(eval.masked_positions));
    CHECK(eval.masked_positions > 5000);
    CHECK(std::abs(eval.accuracy - 100.0 * p) <= 3.0 * se);
    CHECK(std::abs(eval.loss - std::log(25.0)) < 1e-9);
  }

  TEST_CASE("injected perfect logits score 100") {
    TransformerConfig c;
    c.layers = 1;
    c.heads = 1;
    c.d_model = 4;
    c.d_ff = 4;
    c.max_seq = 16;
    c.vocab_size = 10;
    auto model = zero_model(c);
    model.param("out_bias").data[7] = 20.0;
    std::vector<std::vector<int>> seqs(20, std::vector<int>{2, 7, 7, 7, 7, 7, 3});
    CHECK(evaluate_masked(model, seqs, 0.5, 1).accuracy == 100.0);
  }

  TEST_CASE("tokenizer and model sizes must agree") {
    const auto sentences = synthetic::memorization_sentences();
    const auto tok = train_bpe(sentences, 60);
    auto c = scenario::memorization_config(tok.size() + 1, 1);
    CHECK_THROWS_AS(train_mlm(sentences, {}, tok, c), Error);
  }

  TEST_CASE("training is seed-deterministic") {
    const auto sentences = synthetic::memorization_sentences();
    const auto tok = train_bpe(sentences, 80);
    auto c = scenario::memorization_config(tok.size(), 3);
    std::size_t calls = 0;
    const auto a = train_mlm(sentences, {}, tok, c, [&](const EpochMetrics&) { ++calls; });
    const auto b = train_mlm(sentences, {}, tok, c);
    CHECK(calls == 3);
    REQUIRE(a.metrics.size() == 3);
    for (std::size_t t = 0; t < a.model.params().size(); ++t)
      CHECK(a.model.params()[t].data == b.model.params()[t].data);
    CHECK(a.metrics.back().train_loss == b.metrics.back().train_loss);
  }

  TEST_CASE("memorization reaches 100 percent and fills masks") {
    const auto& m = memorized();
    const auto& best = m.result.metrics[m.result.best_epoch - 1];
    CHECK(best.val_accuracy == 100.0);
    CHECK(masked_accuracy(m.result.model, m.tok, m.sentences, 0.15, 77) == 100.0);
    CHECK(m.result.metrics.back().train_loss < m.result.metrics.front().train_loss);

    const auto top = predict_masked(m.result.model, m.tok, "the crystal density of [MASK] was measured by xray diffraction", 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].first == " rdx");
    CHECK(top[0].second > 0.0);
    CHECK(top[0].second <= 1.0);
    CHECK(top[0].second >= top[1].second);
    CHECK(top[1].second >= top[2].second);
    const auto first = predict_masked(m.result.model, m.tok, "[MASK] crystal density of rdx was measured by xray diffraction", 1);
    CHECK(first[0].first == "the");

    CHECK_THROWS_AS(predict_masked(m.result.model, m.tok, "no marker here", 1), Error);
    CHECK_THROWS_AS(predict_masked(m.result.model, m.tok, "[MASK] and [MASK]", 1), Error);
  }
}
