#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "energetext/corpus.hpp"
#include "energetext/rng.hpp"

namespace energetext {

struct LdaConfig {
  std::size_t num_topics = 300;
  double alpha = 1.0;            // symmetric document-topic prior
  double beta = 1.0 / 300.0;     // symmetric topic-word prior
  std::size_t iterations = 400;  // Gibbs sweeps
  std::size_t burn_in = 100;     // sweeps discarded before averaging phi
  std::uint64_t seed = 42;

  void validate() const;
};

/// Per-document topic mixture.
struct DocTopics {
  std::vector<double> theta;
};

/// Fitted topic-word distributions. phi is K x V, row-major.
class LdaModel {
 public:
  LdaModel() = default;
  LdaModel(LdaConfig config, Vocabulary vocab, std::vector<double> phi);

  std::size_t num_topics() const { return config_.num_topics; }
  std::size_t vocab_size() const { return vocab_.size(); }
  double alpha() const { return config_.alpha; }
  double beta() const { return config_.beta; }
  const LdaConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<double>& phi() const { return phi_; }
  double phi(std::size_t topic, std::size_t word) const { return phi_[topic * vocab_.size() + word]; }

 private:
  LdaConfig config_;
  Vocabulary vocab_;
  std::vector<double> phi_;
};

/// Collapsed Gibbs sampler state. Exposed so callers can step the chain and
/// audit the count tables between sweeps.
class LdaSampler {
 public:
  /// Tokens outside the vocabulary are dropped; documents left empty are skipped.
  LdaSampler(const std::vector<ProcessedDocument>& docs, const Vocabulary& vocab, const LdaConfig& config);

  void sweep();
  std::size_t sweeps_done() const { return sweeps_; }

  /// (n_kv + beta) / (n_k + V beta) from the current counts.
  std::vector<double> current_phi() const;

  /// Verifies the count tables against the assignments; returns an empty
  /// string when consistent, otherwise a description of the first violation.
  std::string check_counts() const;

  std::size_t total_tokens() const { return total_tokens_; }
  std::size_t num_documents() const { return words_.size(); }
  const std::vector<std::uint32_t>& topic_word_counts() const { return n_kv_; }  // K x V
  const std::vector<std::uint32_t>& doc_topic_counts() const { return n_dk_; }   // D x K
  const std::vector<std::uint32_t>& topic_counts() const { return n_k_; }

 private:
  std::size_t K_, V_;
  double alpha_, beta_;
  std::vector<std::vector<std::uint32_t>> words_;
  std::vector<std::vector<std::uint32_t>> topics_;
  std::vector<std::uint32_t> n_kv_, n_dk_, n_k_;
  std::size_t total_tokens_ = 0;
  std::size_t sweeps_ = 0;
  Rng rng_;
  std::vector<double> weights_;
};

/// Runs config.iterations sweeps and averages phi over the post-burn-in sweeps.
LdaModel fit_lda(const std::vector<ProcessedDocument>& docs, const Vocabulary& vocab, const LdaConfig& config);

/// Fold-in Gibbs with phi frozen; theta averaged over the last 3/4 of the sweeps.
DocTopics infer_doc_topics(const LdaModel& model, const ProcessedDocument& doc, std::size_t iterations,
                           std::uint64_t seed);

/// Top-k terms of a topic by descending probability, ties lexicographic.
std::vector<std::pair<std::string, double>> top_words(const LdaModel& model, std::size_t topic, std::size_t k);

/// Topics with theta > threshold, by descending probability.
std::vector<std::pair<std::size_t, double>> assigned_topics(const DocTopics& theta, double threshold);

struct PerplexityResult {
  double perplexity = 0.0;
  double log_likelihood = 0.0;     // natural log, summed over scored tokens
  std::size_t scored_tokens = 0;
  std::size_t skipped_tokens = 0;  // out-of-vocabulary
  std::size_t scored_documents = 0;
  std::size_t skipped_documents = 0;  // no in-vocabulary tokens at all
};

/// Held-out perplexity exp(-sum log p(w) / N) with p(w) = sum_k theta_k phi_kw,
/// theta inferred per document by fold-in with seed derived from the doc id.
PerplexityResult lda_perplexity(const LdaModel& model, const std::vector<ProcessedDocument>& heldout,
                                std::size_t fold_in_iterations, std::uint64_t seed);

/// Versioned JSON container; phi stored as base64 little-endian float64.
std::string lda_to_json(const LdaModel& model);
LdaModel lda_from_json(std::string_view text);
void save_lda(const LdaModel& model, const std::filesystem::path& path);
LdaModel load_lda(const std::filesystem::path& path);

/// CSV (topic,rank,term,probability) for every topic.
std::string topic_report_csv(const LdaModel& model, std::size_t k);

}  // namespace energetext
