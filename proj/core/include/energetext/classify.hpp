#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "energetext/bpe.hpp"
#include "energetext/corpus.hpp"
#include "energetext/embeddings.hpp"
#include "energetext/topic_model.hpp"
#include "energetext/transformer.hpp"

namespace energetext {

enum class FeatureMethod { LdaTheta, W2vMean, TransformerMean };

std::string_view to_string(FeatureMethod m);
FeatureMethod parse_feature_method(std::string_view name);

struct FeatureVector {
  std::string id;
  FeatureMethod method = FeatureMethod::LdaTheta;
  std::vector<double> values;
  std::optional<AbstractClass> label;
};

/// Fold-in theta (length K).
FeatureVector featurize_lda(const LdaModel& model, const ProcessedDocument& doc, std::size_t iterations,
                            std::uint64_t seed);
/// Mean input vector over in-vocabulary token occurrences.
FeatureVector featurize_w2v(const EmbeddingMatrix& emb, const ProcessedDocument& doc);
/// Mean final hidden state over the non-special positions of every window of
/// the document; nothing is masked.
FeatureVector featurize_transformer(const TransformerModel& model, const BpeTokenizer& tok, const RawDocument& doc);

/// CSV header id,method,label,v1..vd; label is empty for unlabeled documents.
std::string features_csv(const std::vector<FeatureVector>& features);
std::vector<FeatureVector> parse_features_csv(std::string_view text);

struct RfConfig {
  std::size_t trees = 200;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  bool bootstrap = true;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Axis-aligned node; samples with x[feature] <= threshold go left. counts are
/// per class index (see RandomForest::classes) over the node's training rows.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::size_t> counts;

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at 0

  /// Class index with the most leaf samples; smallest index on ties.
  std::size_t predict_index(const std::vector<double>& x) const;
};

/// Gini trees over ceil(sqrt(d)) candidate features per node.
class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(RfConfig config, std::vector<int> classes, std::size_t num_features, std::vector<DecisionTree> trees);

  const RfConfig& config() const { return config_; }
  const std::vector<int>& classes() const { return classes_; }
  std::size_t num_features() const { return num_features_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  /// Number of trees voting for each class index.
  std::vector<std::size_t> votes(const std::vector<double>& x) const;

 private:
  RfConfig config_;
  std::vector<int> classes_;  // ascending class codes
  std::size_t num_features_ = 0;
  std::vector<DecisionTree> trees_;
};

RandomForest fit_random_forest(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                               const RfConfig& config);

/// Majority vote; ties go to the smallest class code.
int rf_predict(const RandomForest& forest, const std::vector<double>& x);

std::string forest_to_json(const RandomForest& forest);
RandomForest forest_from_json(std::string_view text);

struct CvReport {
  std::string method;
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

/// Fold index per sample. Within each class (ascending code) members are
/// shuffled and dealt round-robin, continuing from where the previous class
/// stopped, so every fold gets floor or ceil of each class's share.
std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t k, std::uint64_t seed);

using Predictor = std::function<int(const std::vector<double>&)>;
using Trainer = std::function<Predictor(const std::vector<std::vector<double>>&, const std::vector<int>&)>;

CvReport cross_validate(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                        std::size_t k, const Trainer& trainer, std::uint64_t seed);
CvReport cross_validate(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                        std::size_t k, const RfConfig& config, std::uint64_t seed);

/// Single stratified holdout (test share `test_fraction`); reported as one fold.
CvReport holdout_validate(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                          double test_fraction, const RfConfig& config, std::uint64_t seed);

/// Mean and population standard deviation.
std::pair<double, double> mean_and_std(const std::vector<double>& values);

/// Earliest word starting with character/model/process/synthes, case-insensitive.
std::optional<AbstractClass> keyword_baseline(std::string_view text);

/// Share of labeled documents whose baseline label matches; unmatched count as wrong.
double baseline_accuracy(const std::vector<RawDocument>& docs);

/// CSV method,fold,accuracy,std: one row per fold (std empty) and a summary
/// row with fold "mean".
std::string cv_report_csv(const std::vector<CvReport>& reports);

}  // namespace energetext
