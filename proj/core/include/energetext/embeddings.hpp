#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "energetext/corpus.hpp"

namespace energetext {

enum class W2vVariant { Cbow, SkipGram };

std::string_view to_string(W2vVariant v);
W2vVariant parse_w2v_variant(std::string_view name);

struct W2vConfig {
  std::size_t dim = 300;
  std::size_t window = 2;
  std::uint64_t min_count = 20;
  W2vVariant variant = W2vVariant::Cbow;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double initial_lr = 0.025;
  std::size_t workers = 1;  // >1 gives unsynchronized (nondeterministic) updates
  std::uint64_t seed = 42;

  void validate() const;
};

/// Input (context-side) and output (prediction-side) vectors, both V x d row-major.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(W2vConfig config, Vocabulary vocab, std::vector<double> input, std::vector<double> output);

  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t dim() const { return config_.dim; }
  const W2vConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }

  std::span<const double> input_row(std::size_t i) const { return {input_.data() + i * dim(), dim()}; }
  std::span<const double> output_row(std::size_t i) const { return {output_.data() + i * dim(), dim()}; }
  std::span<double> input_row(std::size_t i) { return {input_.data() + i * dim(), dim()}; }
  std::span<double> output_row(std::size_t i) { return {output_.data() + i * dim(), dim()}; }
  const std::vector<double>& input() const { return input_; }
  const std::vector<double>& output() const { return output_; }
  std::vector<double>& input() { return input_; }
  std::vector<double>& output() { return output_; }

 private:
  W2vConfig config_;
  Vocabulary vocab_;
  std::vector<double> input_;
  std::vector<double> output_;
};

/// Loss and exact gradient of the negative-sampling objective for one update:
///   L = -log s(o_t . h) - sum_n log s(-o_n . h),  s = logistic
/// where h is the center input vector (skip-gram) or the mean of the context
/// input vectors (CBOW). Repeated negatives accumulate.
struct NegativeSamplingGrad {
  double loss = 0.0;
  std::map<std::size_t, std::vector<double>> d_input;   // row -> dL/d input_vectors[row]
  std::map<std::size_t, std::vector<double>> d_output;  // row -> dL/d output_vectors[row]
};

NegativeSamplingGrad skipgram_gradient(const EmbeddingMatrix& emb, std::size_t center, std::size_t context,
                                       const std::vector<std::size_t>& negatives);
NegativeSamplingGrad cbow_gradient(const EmbeddingMatrix& emb, const std::vector<std::size_t>& context,
                                   std::size_t center, const std::vector<std::size_t>& negatives);

struct W2vTrainLog {
  std::vector<double> epoch_loss;  // mean negative-sampling loss per update
  std::size_t updates = 0;
};

/// SGD with negative sampling (noise ~ count^0.75), learning rate decayed
/// linearly from initial_lr to initial_lr/100 over all updates.
EmbeddingMatrix train_w2v(const std::vector<ProcessedDocument>& docs, const Vocabulary& vocab,
                          const W2vConfig& config, W2vTrainLog* log = nullptr);

/// Skip-gram-form corpus log probability with exact softmax:
///   sum_j sum_k 1[1 <= |k-j| <= m] log softmax(O . I[w_j])[w_k]
/// over the in-vocabulary tokens of doc.
double log_probability(const EmbeddingMatrix& emb, const ProcessedDocument& doc, std::size_t window);

struct MedianLogProb {
  double median = 0.0;
  std::size_t scored = 0;
  std::size_t skipped = 0;  // fewer than two in-vocabulary tokens
  std::vector<double> per_document;  // NaN for skipped documents
};

MedianLogProb median_log_probability(const EmbeddingMatrix& emb, const std::vector<ProcessedDocument>& docs,
                                     std::size_t window);

double median(std::vector<double> values);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct NeighborList {
  std::string query;
  std::vector<std::pair<std::string, double>> neighbors;
};

/// Exhaustive cosine scan over input vectors; query excluded, ties lexicographic.
NeighborList nearest_neighbors(const EmbeddingMatrix& emb, const std::string& term, std::size_t k);

/// Text format: "V d" header then "term v1 .. vd" per row. Input vectors go to
/// `path`, output vectors to output_sidecar(path).
std::filesystem::path output_sidecar(const std::filesystem::path& path);
std::string embedding_rows_to_text(const Vocabulary& vocab, const std::vector<double>& rows, std::size_t dim);
void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

/// CSV (query,rank,term,similarity).
std::string neighbor_report_csv(const std::vector<NeighborList>& lists);

}  // namespace energetext
