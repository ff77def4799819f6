#include <doctest.h>

#include <cmath>
#include <fstream>

#include "energetext/common.hpp"
#include "energetext/rng.hpp"
#include "energetext/transformer.hpp"
#include "oracles.hpp"

using namespace energetext;

namespace {

TransformerConfig tiny_config() {
  TransformerConfig c;
  c.layers = 1;
  c.heads = 1;
  c.d_model = 8;
  c.d_ff = 16;
  c.max_seq = 6;
  c.vocab_size = 12;
  c.seed = 3;
  return c;
}

// Random weights well away from the initialization so no gradient path is
// degenerate (unit gains, zero biases).
TransformerModel jittered(const TransformerConfig& c, std::uint64_t seed) {
  TransformerModel m(c);
  Rng rng(seed);
  for (auto& t : m.params())
    for (auto& x : t.data) x += rng.normal(0.0, 0.3);
  return m;
}

MaskedBatch two_row_batch() {
  return make_batch({{2, 7, 9, 4, 3}, {2, 11, 5, 3}}, {{-1, 7, -1, 6, -1}, {-1, -1, 10, -1}});
}

}  // namespace

TEST_SUITE("transformer") {
  TEST_CASE("config validation and reference sizes") {
    auto c = tiny_config();
    CHECK_NOTHROW(c.validate());
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = tiny_config();
    c.max_seq = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    const auto big = TransformerConfig::full_scale();
    CHECK(big.layers == 6);
    CHECK(big.d_model == 768);
    CHECK(big.heads == 12);
    CHECK(big.vocab_size == 30522);
  }

  TEST_CASE("batches pad with [PAD] and mask exactly those positions") {
    const auto b = two_row_batch();
    CHECK(b.batch == 2);
    CHECK(b.seq == 5);
    CHECK(b.input_ids[9] == 0);
    for (std::size_t i = 0; i < b.input_ids.size(); ++i) CHECK((b.attention_mask[i] == 0) == (b.input_ids[i] == 0));
    CHECK(b.target_ids[9] == -1);
  }

  TEST_CASE("forward shape and input checks") {
    const TransformerModel m(tiny_config());
    const auto logits = forward(m, two_row_batch());
    CHECK(logits.batch == 2);
    CHECK(logits.seq == 5);
    CHECK(logits.classes == 12);
    CHECK(logits.data.size() == 2 * 5 * 12);
    CHECK_THROWS_AS(forward(m, make_batch({{2, 12, 3}})), Error);
    CHECK_THROWS_AS(forward(m, make_batch({{2, 5, 5, 5, 5, 5, 3}})), Error);
  }

  TEST_CASE("initialization and parameter layout") {
    const TransformerModel m(tiny_config());
    CHECK(m.params().size() == 2 + TransformerModel::kTensorsPerLayer + 1);
    CHECK(m.params()[0].name == "tok_emb");
    CHECK(m.params().back().name == "out_bias");
    for (double g : m.param("0.ln1_g").data) CHECK(g == 1.0);
    for (double b : m.param("0.ln2_b").data) CHECK(b == 0.0);
    const std::size_t D = 8, F = 16, C = 12, S = 6;
    CHECK(m.parameter_count() == C * D + S * D + 4 * (D * D + D) + 4 * D + D * F + F + F * D + D + C);
  }

  TEST_CASE("every parameter passes a finite-difference check") {
    const auto model = jittered(tiny_config(), 1);
    const std::vector<double> weights{0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 2.0, 1.0, 1.5, 0.7, 1.2};
    const auto r = oracle::transformer_grad_check(model, two_row_batch(), weights, 1e-4);
    CHECK(r.checked == model.parameter_count());
    CHECK_MESSAGE(r.worst_rel < 1e-3, r.worst_param << " rel " << r.worst_rel);
  }

  TEST_CASE("two layers and two heads also pass") {
    auto c = tiny_config();
    c.layers = 2;
    c.heads = 2;
    const auto r = oracle::transformer_grad_check(jittered(c, 2), two_row_batch(), {}, 1e-4);
    CHECK_MESSAGE(r.worst_rel < 1e-3, r.worst_param << " rel " << r.worst_rel);
  }

  TEST_CASE("attention rows are distributions over real keys") {
    auto c = tiny_config();
    c.heads = 2;
    const auto m = jittered(c, 4);
    AttentionTrace trace;
    const auto batch = two_row_batch();
    forward(m, batch, &trace);
    REQUIRE(trace.weights.size() == 1);
    for (std::size_t b = 0; b < 2; ++b)
      for (const auto& w : trace.weights[0][b])
        for (std::size_t q = 0; q < batch.seq; ++q) {
          double row = 0.0;
          for (std::size_t k = 0; k < batch.seq; ++k) {
            row += w[q * batch.seq + k];
            if (batch.attention_mask[b * batch.seq + k] == 0) CHECK(w[q * batch.seq + k] == 0.0);
          }
          CHECK(std::abs(row - 1.0) < 1e-6);
        }
  }

  TEST_CASE("padding does not change real positions") {
    const auto m = jittered(tiny_config(), 5);
    const std::vector<int> row{2, 8, 6, 3};
    const auto alone = forward(m, make_batch({row}));
    const auto padded = forward(m, make_batch({row, {2, 9, 9, 9, 9, 3}}));
    for (std::size_t s = 0; s < row.size(); ++s)
      for (std::size_t c = 0; c < 12; ++c) CHECK(std::abs(alone.at(0, s, c) - padded.at(0, s, c)) < 1e-6);
  }

  TEST_CASE("layer norm output is standardized") {
    Rng rng(6);
    const std::size_t rows = 50, cols = 16;
    std::vector<double> x(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const double scale = std::pow(10.0, static_cast<double>(r % 5) - 2.0);
      for (std::size_t c = 0; c < cols; ++c) x[r * cols + c] = rng.normal(3.0, scale);
    }
    const auto y = layer_norm_rows(x, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double m = 0.0, v = 0.0;
      for (std::size_t c = 0; c < cols; ++c) m += y[r * cols + c];
      m /= cols;
      for (std::size_t c = 0; c < cols; ++c) v += (y[r * cols + c] - m) * (y[r * cols + c] - m);
      v /= cols;
      CHECK(std::abs(m) < 1e-6);
      CHECK(std::abs(v - 1.0) < 1e-4);
    }
  }

  TEST_CASE("cross-entropy oracles") {
    Logits uniform{1, 1, 10, std::vector<double>(10, 0.25)};
    CHECK(std::abs(cross_entropy_loss(uniform, {3}, {}) - std::log(10.0)) < 1e-9);

    Logits perfect{1, 1, 10, std::vector<double>(10, -30.0)};
    perfect.data[4] = 30.0;
    CHECK(cross_entropy_loss(perfect, {4}, {}) < 1e-6);

    Rng rng(7);
    Logits random{2, 3, 5, std::vector<double>(30)};
    for (auto& x : random.data) x = rng.normal(0.0, 2.0);
    const std::vector<int> targets{-1, 2, -1, -1, -1, 4};
    const std::vector<double> weights{0.5, 1.0, 2.0, 1.0, 3.0};
    CHECK(std::abs(cross_entropy_loss(random, targets, weights) -
                   oracle::brute_cross_entropy(random.data, 5, targets, weights)) < 1e-10);
    CHECK_THROWS_AS(cross_entropy_loss(random, std::vector<int>(6, -1), {}), Error);
  }

  TEST_CASE("model loss agrees with loss on its logits") {
    const auto m = jittered(tiny_config(), 8);
    const auto batch = two_row_batch();
    const double direct = loss_and_gradients(m, batch, {}, nullptr);
    CHECK(std::abs(direct - cross_entropy_loss(forward(m, batch), batch.target_ids, {})) < 1e-10);
  }

  TEST_CASE("full-batch training loss falls at every step") {
    auto c = tiny_config();
    TransformerModel m(c);
    const auto batch = two_row_batch();
    AdamOptimizer opt(m.params(), 1e-3);
    double prev = loss_and_gradients(m, batch, {}, nullptr);
    for (int step = 0; step < 50; ++step) {
      auto grads = zeros_like(m.params());
      loss_and_gradients(m, batch, {}, &grads);
      opt.step(m.params(), grads);
      const double now = loss_and_gradients(m, batch, {}, nullptr);
      CHECK_MESSAGE(now < prev, "step " << step);
      prev = now;
    }
    CHECK(opt.steps() == 50);
  }

  TEST_CASE("manifest plus blob round trip and tamper detection") {
    const auto m = jittered(tiny_config(), 9);
    oracle::TempDir dir("transformer");
    save_transformer(m, dir / "model.json");
    CHECK(std::filesystem::exists(dir / "model.bin"));
    const auto back = load_transformer(dir / "model.json");
    REQUIRE(back.params().size() == m.params().size());
    for (std::size_t t = 0; t < m.params().size(); ++t) CHECK(back.params()[t].data == m.params()[t].data);
    {
      std::fstream blob(dir / "model.bin", std::ios::in | std::ios::out | std::ios::binary);
      blob.seekp(17);
      blob.put('\x7f');
    }
    try {
      load_transformer(dir / "model.json");
      FAIL("tampered blob accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidData);
    }
  }
}
