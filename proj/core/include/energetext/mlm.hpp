#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "energetext/bpe.hpp"
#include "energetext/rng.hpp"
#include "energetext/transformer.hpp"

namespace energetext {

/// One masked sequence; targets are -1 where nothing was selected.
struct MaskedRow {
  std::vector<int> input_ids;
  std::vector<int> target_ids;
};

/// Selects each non-special position with probability `fraction` (one position
/// is forced when none comes up). Selected positions become [MASK] 80% of the
/// time, a random non-special id 10%, and stay unchanged 10%.
MaskedRow mask_tokens(const std::vector<int>& ids, double fraction, Rng& rng, std::size_t vocab_size);
MaskedRow mask_tokens(const std::vector<int>& ids, double fraction, std::uint64_t seed, std::size_t vocab_size);

/// Encodes each text and cuts it into [CLS] ... [SEP] windows of at most
/// max_seq ids. Texts that encode to nothing are dropped.
std::vector<std::vector<int>> encode_sequences(const BpeTokenizer& tok, const std::vector<std::string>& texts,
                                               std::size_t max_seq);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;  // percent
};

/// Index into `metrics` of the highest validation accuracy; the earliest epoch
/// wins ties.
std::size_t select_best_epoch(const std::vector<EpochMetrics>& metrics);

struct MlmTrainResult {
  TransformerModel model;  // parameters from the best epoch
  std::vector<EpochMetrics> metrics;
  std::size_t best_epoch = 0;  // 1-based
};

/// Seeded shuffles and masks per epoch, Adam updates per batch. Validation
/// masking is fixed across epochs so accuracies are comparable.
MlmTrainResult train_mlm(const std::vector<std::string>& train_texts, const std::vector<std::string>& val_texts,
                         const BpeTokenizer& tok, const TransformerConfig& config,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct MlmEvaluation {
  double loss = 0.0;
  double accuracy = 0.0;  // percent
  std::size_t masked_positions = 0;
};

/// Masks sequences with the given seed and scores argmax predictions over
/// non-special ids.
MlmEvaluation evaluate_masked(const TransformerModel& model, const std::vector<std::vector<int>>& sequences,
                              double fraction, std::uint64_t seed);

double masked_accuracy(const TransformerModel& model, const BpeTokenizer& tok, const std::vector<std::string>& texts,
                       double fraction, std::uint64_t seed);

/// Top-k non-special tokens for the single "[MASK]" marker in `text`.
std::vector<std::pair<std::string, double>> predict_masked(const TransformerModel& model, const BpeTokenizer& tok,
                                                           const std::string& text, std::size_t k);

/// Header epoch,train_loss,val_loss,val_masked_accuracy.
std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

}  // namespace energetext
