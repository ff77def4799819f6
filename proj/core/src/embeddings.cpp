#include "energetext/embeddings.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "energetext/common.hpp"
#include "energetext/io.hpp"
#include "energetext/rng.hpp"

namespace energetext {

std::string_view to_string(W2vVariant v) { return v == W2vVariant::Cbow ? "cbow" : "skipgram"; }

W2vVariant parse_w2v_variant(std::string_view name) {
  if (name == "cbow") return W2vVariant::Cbow;
  if (name == "skipgram" || name == "skip-gram") return W2vVariant::SkipGram;
  fail(ErrorKind::InvalidArgument, "unknown word2vec variant: " + std::string(name));
}

void W2vConfig::validate() const {
  require(dim >= 1, "embedding dimension must be at least 1");
  require(window >= 1, "context window must be at least 1");
  require(negatives >= 1, "need at least one negative sample");
  require(epochs >= 1, "need at least one epoch");
  require(initial_lr > 0.0 && std::isfinite(initial_lr), "learning rate must be positive");
  require(workers >= 1, "need at least one worker");
}

EmbeddingMatrix::EmbeddingMatrix(W2vConfig config, Vocabulary vocab, std::vector<double> input,
                                 std::vector<double> output)
    : config_(std::move(config)), vocab_(std::move(vocab)), input_(std::move(input)), output_(std::move(output)) {
  require(input_.size() == vocab_.size() * config_.dim, "input vectors have the wrong shape");
  require(output_.size() == vocab_.size() * config_.dim, "output vectors have the wrong shape");
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log s(x), stable for large |x|.
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

struct NsTerm {
  std::size_t row;
  double label;  // 1 for the true word, 0 for noise
};

// Loss of one negative-sampling update and its gradients with respect to the
// hidden vector and each output row. `out_rows[i]` holds the current value of
// output_vectors[terms[i].row].
double ns_core(std::span<const double> h, const std::vector<NsTerm>& terms,
               const std::vector<std::vector<double>>& out_rows, std::vector<double>& d_h,
               std::vector<std::vector<double>>& d_out) {
  const std::size_t d = h.size();
  d_h.assign(d, 0.0);
  d_out.assign(terms.size(), std::vector<double>(d, 0.0));
  double loss = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double score = dot(out_rows[i], h);
    loss -= terms[i].label > 0.5 ? log_sigmoid(score) : log_sigmoid(-score);
    const double g = sigmoid(score) - terms[i].label;
    for (std::size_t j = 0; j < d; ++j) {
      d_out[i][j] = g * h[j];
      d_h[j] += g * out_rows[i][j];
    }
  }
  return loss;
}

std::vector<NsTerm> make_terms(std::size_t target, const std::vector<std::size_t>& negatives) {
  std::vector<NsTerm> terms{{target, 1.0}};
  for (auto n : negatives) terms.push_back({n, 0.0});
  return terms;
}

void accumulate(std::map<std::size_t, std::vector<double>>& into, std::size_t row, const std::vector<double>& g,
                double scale = 1.0) {
  auto& dst = into[row];
  if (dst.empty()) dst.assign(g.size(), 0.0);
  for (std::size_t j = 0; j < g.size(); ++j) dst[j] += scale * g[j];
}

std::vector<double> copy_row(std::span<const double> row) { return {row.begin(), row.end()}; }

}  // namespace

NegativeSamplingGrad skipgram_gradient(const EmbeddingMatrix& emb, std::size_t center, std::size_t context,
                                       const std::vector<std::size_t>& negatives) {
  const auto terms = make_terms(context, negatives);
  std::vector<std::vector<double>> out_rows;
  for (const auto& t : terms) out_rows.push_back(copy_row(emb.output_row(t.row)));
  std::vector<double> d_h;
  std::vector<std::vector<double>> d_out;
  NegativeSamplingGrad g;
  g.loss = ns_core(emb.input_row(center), terms, out_rows, d_h, d_out);
  accumulate(g.d_input, center, d_h);
  for (std::size_t i = 0; i < terms.size(); ++i) accumulate(g.d_output, terms[i].row, d_out[i]);
  return g;
}

NegativeSamplingGrad cbow_gradient(const EmbeddingMatrix& emb, const std::vector<std::size_t>& context,
                                   std::size_t center, const std::vector<std::size_t>& negatives) {
  require(!context.empty(), "CBOW update needs at least one context word");
  const std::size_t d = emb.dim();
  std::vector<double> h(d, 0.0);
  for (auto c : context) {
    auto row = emb.input_row(c);
    for (std::size_t j = 0; j < d; ++j) h[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(context.size());
  for (auto& x : h) x *= inv;

  const auto terms = make_terms(center, negatives);
  std::vector<std::vector<double>> out_rows;
  for (const auto& t : terms) out_rows.push_back(copy_row(emb.output_row(t.row)));
  std::vector<double> d_h;
  std::vector<std::vector<double>> d_out;
  NegativeSamplingGrad g;
  g.loss = ns_core(h, terms, out_rows, d_h, d_out);
  for (auto c : context) accumulate(g.d_input, c, d_h, inv);
  for (std::size_t i = 0; i < terms.size(); ++i) accumulate(g.d_output, terms[i].row, d_out[i]);
  return g;
}

namespace {

// Relaxed atomic row access: with one worker this is plain loads and stores;
// with several it gives defined (if racy in the modelling sense) behaviour.
void load_row(std::vector<double>& data, std::size_t row, std::size_t d, std::vector<double>& out) {
  out.resize(d);
  double* base = data.data() + row * d;
  for (std::size_t j = 0; j < d; ++j) out[j] = std::atomic_ref<double>(base[j]).load(std::memory_order_relaxed);
}

void add_to_row(std::vector<double>& data, std::size_t row, std::span<const double> delta, double scale) {
  double* base = data.data() + row * delta.size();
  for (std::size_t j = 0; j < delta.size(); ++j) {
    std::atomic_ref<double> ref(base[j]);
    ref.store(ref.load(std::memory_order_relaxed) + scale * delta[j], std::memory_order_relaxed);
  }
}

class NoiseSampler {
 public:
  explicit NoiseSampler(const Vocabulary& vocab) {
    cdf_.resize(vocab.size());
    double total = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < vocab.size(); ++i) any |= vocab.count(i) > 0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      total += any ? std::pow(static_cast<double>(vocab.count(i)), 0.75) : 1.0;
      cdf_[i] = total;
    }
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto i = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    return std::min(i, cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

struct Trainer {
  const W2vConfig& config;
  EmbeddingMatrix& emb;
  const NoiseSampler& noise;
  const std::vector<std::vector<std::size_t>>& docs;
  std::uint64_t total_positions;
  std::atomic<std::uint64_t>& progress;

  double learning_rate(std::uint64_t step) const {
    const double lr0 = config.initial_lr;
    if (total_positions <= 1) return lr0;
    const double frac = static_cast<double>(std::min(step, total_positions - 1)) / static_cast<double>(total_positions - 1);
    return lr0 - (lr0 - lr0 / 100.0) * frac;
  }

  std::vector<std::size_t> draw_negatives(Rng& rng, std::size_t target) const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < config.negatives; ++n) {
      const auto w = noise.draw(rng);
      if (w != target) out.push_back(w);
    }
    return out;
  }

  // One update: h built from `inputs` (mean), predicts `target`.
  double update(const std::vector<std::size_t>& inputs, std::size_t target, double lr, Rng& rng) {
    const std::size_t d = config.dim;
    const auto negatives = draw_negatives(rng, target);
    const auto terms = make_terms(target, negatives);
    std::vector<double> h(d, 0.0), row;
    for (auto c : inputs) {
      load_row(emb.input(), c, d, row);
      for (std::size_t j = 0; j < d; ++j) h[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(inputs.size());
    for (auto& x : h) x *= inv;
    std::vector<std::vector<double>> out_rows(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) load_row(emb.output(), terms[i].row, d, out_rows[i]);

    std::vector<double> d_h;
    std::vector<std::vector<double>> d_out;
    const double loss = ns_core(h, terms, out_rows, d_h, d_out);
    for (std::size_t i = 0; i < terms.size(); ++i) add_to_row(emb.output(), terms[i].row, d_out[i], -lr);
    for (auto c : inputs) add_to_row(emb.input(), c, d_h, -lr * inv);
    return loss;
  }

  // Processes docs[begin, end); returns (loss sum, update count).
  std::pair<double, std::uint64_t> run(std::size_t begin, std::size_t end, Rng& rng) {
    const std::size_t m = config.window;
    double loss = 0.0;
    std::uint64_t updates = 0;
    std::vector<std::size_t> ctx;
    for (std::size_t di = begin; di < end; ++di) {
      const auto& doc = docs[di];
      const std::size_t n = doc.size();
      for (std::size_t j = 0; j < n; ++j) {
        const double lr = learning_rate(progress.fetch_add(1, std::memory_order_relaxed));
        const std::size_t lo = j >= m ? j - m : 0;
        const std::size_t hi = std::min(n - 1, j + m);
        if (config.variant == W2vVariant::SkipGram) {
          for (std::size_t k = lo; k <= hi; ++k) {
            if (k == j) continue;
            loss += update({doc[j]}, doc[k], lr, rng);
            ++updates;
          }
        } else {
          ctx.clear();
          for (std::size_t k = lo; k <= hi; ++k)
            if (k != j) ctx.push_back(doc[k]);
          if (ctx.empty()) continue;
          loss += update(ctx, doc[j], lr, rng);
          ++updates;
        }
      }
    }
    return {loss, updates};
  }
};

}  // namespace

EmbeddingMatrix train_w2v(const std::vector<ProcessedDocument>& docs, const Vocabulary& vocab,
                          const W2vConfig& config, W2vTrainLog* log) {
  config.validate();
  const std::size_t V = vocab.size(), d = config.dim;
  if (V < config.negatives + 1)
    fail(ErrorKind::InvalidArgument, "vocabulary of " + std::to_string(V) + " terms is smaller than negatives+1");

  std::vector<std::vector<std::size_t>> encoded;
  std::uint64_t total_tokens = 0;
  for (const auto& doc : docs) {
    auto ids = vocab.encode(doc.tokens);
    total_tokens += ids.size();
    if (!ids.empty()) encoded.push_back(std::move(ids));
  }
  if (total_tokens == 0) fail(ErrorKind::InvalidData, "no in-vocabulary tokens to train on");

  std::vector<double> input(V * d), output(V * d, 0.0);
  Rng init(derive_seed(config.seed, "w2v:init"));
  for (auto& x : input) x = (init.uniform() - 0.5) / static_cast<double>(d);
  EmbeddingMatrix emb(config, vocab, std::move(input), std::move(output));

  NoiseSampler noise(vocab);
  std::atomic<std::uint64_t> progress{0};
  Trainer trainer{config, emb, noise, encoded, total_tokens * config.epochs, progress};
  const std::size_t workers = std::min(config.workers, encoded.size());

  std::vector<Rng> rngs;
  for (std::size_t w = 0; w < workers; ++w)
    rngs.emplace_back(derive_seed(config.seed, "w2v:negatives:" + std::to_string(w)));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0.0;
    std::uint64_t updates = 0;
    if (workers <= 1) {
      std::tie(loss, updates) = trainer.run(0, encoded.size(), rngs[0]);
    } else {
      std::vector<std::pair<double, std::uint64_t>> parts(workers);
      std::vector<std::thread> pool;
      const std::size_t chunk = (encoded.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = std::min(encoded.size(), w * chunk), e = std::min(encoded.size(), b + chunk);
        pool.emplace_back([&, w, b, e] { parts[w] = trainer.run(b, e, rngs[w]); });
      }
      for (auto& t : pool) t.join();
      for (const auto& [l, u] : parts) {
        loss += l;
        updates += u;
      }
    }
    const double mean_loss = updates ? loss / static_cast<double>(updates) : 0.0;
    if (!std::isfinite(mean_loss))
      fail(ErrorKind::Numeric, "word2vec loss became non-finite in epoch " + std::to_string(epoch + 1));
    if (log) {
      log->epoch_loss.push_back(mean_loss);
      log->updates += updates;
    }
  }
  for (double x : emb.input())
    if (!std::isfinite(x)) fail(ErrorKind::Numeric, "word2vec produced non-finite input vectors");
  return emb;
}

double log_probability(const EmbeddingMatrix& emb, const ProcessedDocument& doc, std::size_t window) {
  require(window >= 1, "window must be at least 1");
  const auto ids = emb.vocab().encode(doc.tokens);
  if (ids.size() < 2) fail(ErrorKind::InvalidArgument, "document " + doc.id + " has fewer than 2 in-vocabulary tokens");
  const std::size_t V = emb.vocab_size(), n = ids.size();
  std::vector<double> scores(V);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto h = emb.input_row(ids[j]);
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < V; ++c) {
      scores[c] = dot(emb.output_row(c), h);
      max_score = std::max(max_score, scores[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < V; ++c) z += std::exp(scores[c] - max_score);
    const double log_z = max_score + std::log(z);
    const std::size_t lo = j >= window ? j - window : 0;
    const std::size_t hi = std::min(n - 1, j + window);
    for (std::size_t k = lo; k <= hi; ++k)
      if (k != j) total += scores[ids[k]] - log_z;
  }
  return std::min(total, 0.0);
}

double median(std::vector<double> values) {
  require(!values.empty(), "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MedianLogProb median_log_probability(const EmbeddingMatrix& emb, const std::vector<ProcessedDocument>& docs,
                                     std::size_t window) {
  MedianLogProb r;
  r.per_document.assign(docs.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(docs.size(), [&](std::size_t i) {
    if (emb.vocab().encode(docs[i].tokens).size() >= 2) r.per_document[i] = log_probability(emb, docs[i], window);
  });
  std::vector<double> scored;
  for (double v : r.per_document)
    if (!std::isnan(v)) scored.push_back(v);
  r.scored = scored.size();
  r.skipped = docs.size() - scored.size();
  if (scored.empty()) fail(ErrorKind::InvalidArgument, "no document has at least 2 in-vocabulary tokens");
  r.median = median(std::move(scored));
  return r;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), "cosine similarity of vectors with different lengths");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu <= 0.0 || vv <= 0.0) fail(ErrorKind::InvalidArgument, "cosine similarity of a zero-norm vector");
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

NeighborList nearest_neighbors(const EmbeddingMatrix& emb, const std::string& term, std::size_t k) {
  const auto q = emb.vocab().index(term);
  if (!q) fail(ErrorKind::InvalidArgument, "term not in vocabulary: " + term);
  NeighborList out;
  out.query = term;
  const auto qv = emb.input_row(*q);
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t i = 0; i < emb.vocab_size(); ++i) {
    if (i == *q) continue;
    const auto row = emb.input_row(i);
    if (dot(row, row) <= 0.0) continue;
    all.emplace_back(emb.vocab().term(i), cosine_similarity(qv, row));
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                    });
  all.resize(take);
  out.neighbors = std::move(all);
  return out;
}

std::filesystem::path output_sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".output";
  return p;
}

std::string embedding_rows_to_text(const Vocabulary& vocab, const std::vector<double>& rows, std::size_t dim) {
  std::string out = std::to_string(vocab.size()) + " " + std::to_string(dim) + "\n";
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out += vocab.term(i);
    for (std::size_t j = 0; j < dim; ++j) {
      out += ' ';
      out += io::format_double(rows[i * dim + j]);
    }
    out += '\n';
  }
  return out;
}

void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path) {
  io::write_file(path, embedding_rows_to_text(emb.vocab(), emb.input(), emb.dim()));
  io::write_file(output_sidecar(path), embedding_rows_to_text(emb.vocab(), emb.output(), emb.dim()));
}

namespace {

std::pair<std::vector<std::string>, std::vector<double>> parse_embedding_text(const std::string& text,
                                                                              const std::string& where,
                                                                              std::size_t& dim_out) {
  std::istringstream in(text);
  std::size_t V = 0, d = 0;
  if (!(in >> V >> d) || d == 0) fail(ErrorKind::InvalidData, "bad embedding header in " + where);
  std::vector<std::string> terms(V);
  std::vector<double> rows(V * d);
  for (std::size_t i = 0; i < V; ++i) {
    if (!(in >> terms[i])) fail(ErrorKind::InvalidData, "truncated embedding file " + where);
    for (std::size_t j = 0; j < d; ++j) {
      std::string tok;
      if (!(in >> tok)) fail(ErrorKind::InvalidData, "truncated embedding row " + std::to_string(i + 1) + " in " + where);
      try {
        rows[i * d + j] = std::stod(tok);
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidData, "bad number in embedding row " + std::to_string(i + 1) + " in " + where);
      }
    }
  }
  dim_out = d;
  return {std::move(terms), std::move(rows)};
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::size_t d_in = 0, d_out = 0;
  auto [terms, input] = parse_embedding_text(io::read_file(path), path.string(), d_in);
  auto [terms_out, output] = parse_embedding_text(io::read_file(output_sidecar(path)),
                                                  output_sidecar(path).string(), d_out);
  if (terms != terms_out || d_in != d_out)
    fail(ErrorKind::InvalidData, "input and output embedding files disagree");
  W2vConfig config;
  config.dim = d_in;
  config.min_count = 0;
  const std::size_t V = terms.size();
  Vocabulary vocab(std::move(terms), std::vector<std::uint64_t>(V, 0), 0);
  return EmbeddingMatrix(config, std::move(vocab), std::move(input), std::move(output));
}

std::string neighbor_report_csv(const std::vector<NeighborList>& lists) {
  std::string out = "query,rank,term,similarity\n";
  for (const auto& l : lists)
    for (std::size_t r = 0; r < l.neighbors.size(); ++r)
      out += io::csv_escape(l.query) + "," + std::to_string(r + 1) + "," + io::csv_escape(l.neighbors[r].first) +
             "," + io::format_double(l.neighbors[r].second) + "\n";
  return out;
}

}  // namespace energetext
