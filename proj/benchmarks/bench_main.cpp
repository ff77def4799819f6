#include <benchmark/benchmark.h>

#include "energetext/classify.hpp"
#include "energetext/corpus.hpp"
#include "energetext/embeddings.hpp"
#include "energetext/projection.hpp"
#include "energetext/rng.hpp"
#include "energetext/synthetic.hpp"
#include "energetext/topic_model.hpp"
#include "energetext/transformer.hpp"

using namespace energetext;

namespace {

std::vector<ProcessedDocument> topic_docs(std::size_t n) {
  synthetic::TopicCorpusOptions o;
  o.documents = n;
  o.num_topics = 4;
  return preprocess_corpus(synthetic::make_topic_corpus(o, 1).docs, default_stoplist(), default_synonyms());
}

void BM_GibbsSweep(benchmark::State& state) {
  const auto docs = topic_docs(200);
  const auto vocab = build_vocabulary(docs, 1);
  LdaConfig c;
  c.num_topics = static_cast<std::size_t>(state.range(0));
  c.beta = 0.01;
  LdaSampler sampler(docs, vocab, c);
  for (auto _ : state) sampler.sweep();
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * sampler.total_tokens()));
}
BENCHMARK(BM_GibbsSweep)->Arg(10)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_W2vEpoch(benchmark::State& state) {
  const auto docs = topic_docs(200);
  const auto vocab = build_vocabulary(docs, 1);
  W2vConfig c;
  c.dim = 50;
  c.min_count = 1;
  c.epochs = 1;
  c.variant = state.range(0) == 0 ? W2vVariant::Cbow : W2vVariant::SkipGram;
  for (auto _ : state) benchmark::DoNotOptimize(train_w2v(docs, vocab, c));
}
BENCHMARK(BM_W2vEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TransformerStep(benchmark::State& state) {
  TransformerConfig c;
  c.layers = 2;
  c.heads = 4;
  c.d_model = static_cast<std::size_t>(state.range(0));
  c.d_ff = 4 * c.d_model;
  c.max_seq = 64;
  c.vocab_size = 500;
  const TransformerModel model(c);
  Rng rng(3);
  std::vector<std::vector<int>> inputs, targets;
  for (int b = 0; b < 8; ++b) {
    std::vector<int> in{2}, tg{-1};
    for (int s = 0; s < 62; ++s) {
      in.push_back(5 + static_cast<int>(rng.below(495)));
      tg.push_back(s % 7 == 0 ? in.back() : -1);
    }
    in.push_back(3);
    tg.push_back(-1);
    inputs.push_back(in);
    targets.push_back(tg);
  }
  const auto batch = make_batch(inputs, targets);
  auto grads = zeros_like(model.params());
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(model, batch, {}, &grads));
}
BENCHMARK(BM_TransformerStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ForestFit(benchmark::State& state) {
  Rng rng(4);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> row(static_cast<std::size_t>(state.range(0)));
    for (auto& v : row) v = rng.normal();
    y.push_back(row[0] + row[1] > 0 ? 1 : 0);
    x.push_back(std::move(row));
  }
  RfConfig c;
  c.trees = 50;
  for (auto _ : state) benchmark::DoNotOptimize(fit_random_forest(x, y, c));
}
BENCHMARK(BM_ForestFit)->Arg(8)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_TsneGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 20;
  Rng rng(5);
  std::vector<double> x(n * d), y(2 * n);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal(0.0, 1e-2);
  const auto p = symmetrize(conditional_probabilities(x, n, d, 30.0), n);
  for (auto _ : state) benchmark::DoNotOptimize(tsne_gradient(p, y, n));
}
BENCHMARK(BM_TsneGradient)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
