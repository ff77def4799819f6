#include "energetext/classify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <tuple>

#include "energetext/common.hpp"
#include "energetext/io.hpp"
#include "energetext/mlm.hpp"
#include "energetext/rng.hpp"

namespace energetext {

using nlohmann::json;

std::string_view to_string(FeatureMethod m) {
  switch (m) {
    case FeatureMethod::LdaTheta: return "lda-theta";
    case FeatureMethod::W2vMean: return "w2v-mean";
    case FeatureMethod::TransformerMean: return "transformer-mean";
  }
  return "unknown";
}

FeatureMethod parse_feature_method(std::string_view name) {
  if (name == "lda-theta" || name == "lda") return FeatureMethod::LdaTheta;
  if (name == "w2v-mean" || name == "w2v") return FeatureMethod::W2vMean;
  if (name == "transformer-mean" || name == "transformer") return FeatureMethod::TransformerMean;
  fail(ErrorKind::InvalidArgument, "unknown featurization method: " + std::string(name));
}

FeatureVector featurize_lda(const LdaModel& model, const ProcessedDocument& doc, std::size_t iterations,
                            std::uint64_t seed) {
  return {doc.id, FeatureMethod::LdaTheta, infer_doc_topics(model, doc, iterations, seed).theta, doc.label};
}

FeatureVector featurize_w2v(const EmbeddingMatrix& emb, const ProcessedDocument& doc) {
  std::vector<double> sum(emb.dim(), 0.0);
  std::size_t n = 0;
  for (const auto& t : doc.tokens) {
    const auto i = emb.vocab().index(t);
    if (!i) continue;
    const auto row = emb.input_row(*i);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += row[j];
    ++n;
  }
  if (n == 0) fail(ErrorKind::InvalidArgument, "document " + doc.id + " has no in-vocabulary tokens");
  for (auto& v : sum) v /= static_cast<double>(n);
  return {doc.id, FeatureMethod::W2vMean, std::move(sum), doc.label};
}

FeatureVector featurize_transformer(const TransformerModel& model, const BpeTokenizer& tok, const RawDocument& doc) {
  const std::size_t D = model.config().d_model;
  std::vector<double> sum(D, 0.0);
  std::size_t n = 0;
  for (const auto& seq : encode_sequences(tok, {doc.text}, model.config().max_seq)) {
    const auto h = hidden_states(model, make_batch({seq}));
    for (std::size_t s = 0; s < seq.size(); ++s) {
      if (BpeTokenizer::is_special(seq[s])) continue;
      for (std::size_t j = 0; j < D; ++j) sum[j] += h[s * D + j];
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::InvalidArgument, "document " + doc.id + " encodes to no ordinary tokens");
  for (auto& v : sum) v /= static_cast<double>(n);
  std::optional<AbstractClass> label;
  if (doc.label) label = parse_abstract_class(*doc.label);
  return {doc.id, FeatureMethod::TransformerMean, std::move(sum), label};
}

std::string features_csv(const std::vector<FeatureVector>& features) {
  require(!features.empty(), "no feature vectors to write");
  const std::size_t d = features.front().values.size();
  std::ostringstream out;
  out << "id,method,label";
  for (std::size_t j = 1; j <= d; ++j) out << ",v" << j;
  out << '\n';
  for (const auto& f : features) {
    require(f.values.size() == d, "feature vectors differ in length");
    out << io::csv_escape(f.id) << ',' << to_string(f.method) << ',';
    if (f.label) out << to_string(*f.label);
    for (double v : f.values) out << ',' << io::format_double(v);
    out << '\n';
  }
  return out.str();
}

std::vector<FeatureVector> parse_features_csv(std::string_view text) {
  const auto lines = io::split_lines(text);
  if (lines.empty()) fail(ErrorKind::InvalidData, "features file is empty");
  const auto header = io::csv_split(lines[0]);
  if (header.size() < 4 || header[0] != "id" || header[1] != "method" || header[2] != "label")
    fail(ErrorKind::InvalidData, "features file must start with id,method,label,v1..");
  std::vector<FeatureVector> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto cells = io::csv_split(lines[i]);
    if (cells.size() != header.size())
      fail(ErrorKind::InvalidData, "features line " + std::to_string(i + 1) + " has " + std::to_string(cells.size()) +
                                       " fields, expected " + std::to_string(header.size()));
    FeatureVector f;
    f.id = cells[0];
    f.method = parse_feature_method(cells[1]);
    if (!cells[2].empty()) {
      f.label = parse_abstract_class(cells[2]);
      if (!f.label) fail(ErrorKind::InvalidData, "unknown label '" + cells[2] + "' on features line " + std::to_string(i + 1));
    }
    for (std::size_t j = 3; j < cells.size(); ++j) {
      try {
        std::size_t used = 0;
        f.values.push_back(std::stod(cells[j], &used));
        if (used != cells[j].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidData, "bad number '" + cells[j] + "' on features line " + std::to_string(i + 1));
      }
      if (!std::isfinite(f.values.back()))
        fail(ErrorKind::InvalidData, "non-finite value on features line " + std::to_string(i + 1));
    }
    out.push_back(std::move(f));
  }
  return out;
}

void RfConfig::validate() const {
  require(trees >= 1, "forest needs at least one tree");
  require(!max_depth || *max_depth >= 1, "max_depth must be at least 1");
}

std::size_t DecisionTree::predict_index(const std::vector<double>& x) const {
  std::size_t n = 0;
  while (!nodes[n].is_leaf()) {
    const auto& node = nodes[n];
    n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  const auto& c = nodes[n].counts;
  return static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
}

RandomForest::RandomForest(RfConfig config, std::vector<int> classes, std::size_t num_features,
                           std::vector<DecisionTree> trees)
    : config_(config), classes_(std::move(classes)), num_features_(num_features), trees_(std::move(trees)) {
  require(std::is_sorted(classes_.begin(), classes_.end()) &&
              std::adjacent_find(classes_.begin(), classes_.end()) == classes_.end(),
          "forest classes must be strictly ascending");
  for (const auto& t : trees_) {
    require(!t.nodes.empty(), "forest contains an empty tree");
    for (const auto& node : t.nodes) {
      require(node.counts.size() == classes_.size(), "tree node class counts have the wrong length");
      if (node.is_leaf()) continue;
      const auto n = static_cast<int>(t.nodes.size());
      require(static_cast<std::size_t>(node.feature) < num_features_ && node.left > 0 && node.right > 0 &&
                  node.left < n && node.right < n,
              "tree node refers outside the tree");
    }
  }
}

std::vector<std::size_t> RandomForest::votes(const std::vector<double>& x) const {
  if (x.size() != num_features_)
    fail(ErrorKind::InvalidArgument, "feature vector has length " + std::to_string(x.size()) + ", forest expects " +
                                         std::to_string(num_features_));
  std::vector<std::size_t> v(classes_.size(), 0);
  for (const auto& t : trees_) ++v[t.predict_index(x)];
  return v;
}

int rf_predict(const RandomForest& forest, const std::vector<double>& x) {
  const auto v = forest.votes(x);
  return forest.classes()[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())];
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<std::size_t>& y, std::size_t classes,
              const RfConfig& config, std::uint64_t seed)
      : x_(x), y_(y), classes_(classes), config_(config), rng_(seed) {
    const std::size_t d = x.front().size();
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    double impurity;
    std::size_t feature;
    double threshold;
  };

  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<std::size_t> counts(classes_, 0);
    for (auto r : rows) ++counts[y_[r]];
    tree_.nodes[static_cast<std::size_t>(id)].counts = counts;

    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || (config_.max_depth && depth >= *config_.max_depth)) return id;
    const auto split = best_split(rows);
    if (!split) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_[r][split->feature] <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  static constexpr double kTie = 1e-12;

  // Weighted child impurity n_L G_L + n_R G_R of the best cut on one feature.
  std::optional<Split> best_cut(const std::vector<std::size_t>& rows, std::size_t f) const {
    std::vector<std::pair<double, std::size_t>> v;
    v.reserve(rows.size());
    for (auto r : rows) v.emplace_back(x_[r][f], y_[r]);
    std::sort(v.begin(), v.end());
    std::vector<double> left(classes_, 0.0), right(classes_, 0.0);
    for (const auto& [_, c] : v) right[c] += 1.0;
    double left_sq = 0.0, right_sq = 0.0;
    for (double c : right) right_sq += c * c;
    std::optional<Split> best;
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const std::size_t c = v[i].second;
      left_sq += 2.0 * left[c] + 1.0;
      left[c] += 1.0;
      right_sq -= 2.0 * right[c] - 1.0;
      right[c] -= 1.0;
      if (v[i].first == v[i + 1].first) continue;
      const double nl = static_cast<double>(i + 1), nr = n - nl;
      const double impurity = (nl - left_sq / nl) + (nr - right_sq / nr);
      // Scanning upward, a cut within kTie of the best keeps the smaller threshold.
      if (!best || impurity < best->impurity - kTie) {
        const double a = v[i].first, b = v[i + 1].first;
        double t = a + (b - a) / 2.0;
        if (!(t > a && t < b)) t = a;  // adjacent doubles: x <= a still separates
        best = Split{impurity, f, t};
      }
    }
    return best;
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& rows) {
    const std::size_t d = x_.front().size();
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    rng_.shuffle(perm);
    std::optional<Split> best;
    for (std::size_t i = 0; i < d; ++i) {
      // Past the first mtry candidates, keep drawing only until one feature splits.
      if (i >= mtry_ && best) break;
      const auto s = best_cut(rows, perm[i]);
      if (!s) continue;
      if (!best || s->impurity < best->impurity - kTie ||
          (std::abs(s->impurity - best->impurity) <= kTie &&
           (s->feature < best->feature || (s->feature == best->feature && s->threshold < best->threshold))))
        best = s;
    }
    return best;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<std::size_t>& y_;
  std::size_t classes_;
  const RfConfig& config_;
  Rng rng_;
  std::size_t mtry_ = 1;
  DecisionTree tree_;
};

void check_dataset(const std::vector<std::vector<double>>& features, const std::vector<int>& labels) {
  require(!features.empty(), "no training samples");
  require(features.size() == labels.size(), "features and labels differ in count");
  const std::size_t d = features.front().size();
  require(d >= 1, "feature vectors are empty");
  for (const auto& f : features) {
    require(f.size() == d, "feature vectors differ in length");
    for (double v : f)
      if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "feature values must be finite");
  }
}

}  // namespace

RandomForest fit_random_forest(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                               const RfConfig& config) {
  config.validate();
  check_dataset(features, labels);
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) fail(ErrorKind::InvalidArgument, "random forest needs at least two classes");
  std::vector<std::size_t> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    y[i] = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());

  const std::uint64_t tree_seed = derive_seed(config.seed, "rf:tree");
  const std::size_t n = features.size();
  std::vector<DecisionTree> trees(config.trees);
  parallel_for(config.trees, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(tree_seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      Rng boot(derive_seed(seed, "rf:bootstrap"));
      for (auto& r : rows) r = static_cast<std::size_t>(boot.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees[t] = TreeBuilder(features, y, classes.size(), config, seed).build(std::move(rows));
  });
  return RandomForest(config, std::move(classes), features.front().size(), std::move(trees));
}

namespace {
constexpr int kForestSchemaVersion = 1;
}

std::string forest_to_json(const RandomForest& forest) {
  json j;
  j["schema_version"] = kForestSchemaVersion;
  j["kind"] = "random-forest";
  const auto& c = forest.config();
  j["config"] = {{"trees", c.trees}, {"bootstrap", c.bootstrap}, {"seed", c.seed}, {"criterion", "gini"},
                 {"max_features", "sqrt"}};
  j["config"]["max_depth"] = c.max_depth ? json(*c.max_depth) : json(nullptr);
  j["classes"] = forest.classes();
  j["num_features"] = forest.num_features();
  json trees = json::array();
  for (const auto& t : forest.trees()) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.counts});
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump() + "\n";
}

RandomForest forest_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != kForestSchemaVersion)
      fail(ErrorKind::InvalidData, "unsupported forest schema version");
    RfConfig c;
    const auto& jc = j.at("config");
    c.trees = jc.at("trees");
    c.bootstrap = jc.at("bootstrap");
    c.seed = jc.at("seed");
    if (!jc.at("max_depth").is_null()) c.max_depth = jc.at("max_depth").get<std::size_t>();
    std::vector<DecisionTree> trees;
    for (const auto& jt : j.at("trees")) {
      DecisionTree t;
      for (const auto& jn : jt)
        t.nodes.push_back(TreeNode{jn.at(0).get<int>(), jn.at(1).get<double>(), jn.at(2).get<int>(),
                                   jn.at(3).get<int>(), jn.at(4).get<std::vector<std::size_t>>()});
      trees.push_back(std::move(t));
    }
    return RandomForest(c, j.at("classes").get<std::vector<int>>(), j.at("num_features").get<std::size_t>(),
                        std::move(trees));
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("malformed forest: ") + e.what());
  }
}

std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  require(k >= 2, "cross-validation needs k >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class)
    if (members.size() < k)
      fail(ErrorKind::InvalidArgument, "class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                                           " members, fewer than k=" + std::to_string(k));
  Rng rng(derive_seed(seed, "cv:folds"));
  std::vector<std::size_t> fold(labels.size());
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (auto i : members) {
      fold[i] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  require(!values.empty(), "no values to summarize");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

namespace {

double score_fold(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                  const std::vector<bool>& is_test, const Trainer& trainer) {
  std::vector<std::vector<double>> xtr;
  std::vector<int> ytr;
  for (std::size_t i = 0; i < features.size(); ++i)
    if (!is_test[i]) {
      xtr.push_back(features[i]);
      ytr.push_back(labels[i]);
    }
  const Predictor predict = trainer(xtr, ytr);
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < features.size(); ++i)
    if (is_test[i]) {
      correct += predict(features[i]) == labels[i];
      ++total;
    }
  require(total > 0, "evaluation fold is empty");
  return static_cast<double>(correct) / static_cast<double>(total);
}

Trainer forest_trainer(const RfConfig& config) {
  return [config](const std::vector<std::vector<double>>& x, const std::vector<int>& y) -> Predictor {
    auto forest = std::make_shared<RandomForest>(fit_random_forest(x, y, config));
    return [forest](const std::vector<double>& v) { return rf_predict(*forest, v); };
  };
}

}  // namespace

CvReport cross_validate(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                        std::size_t k, const Trainer& trainer, std::uint64_t seed) {
  check_dataset(features, labels);
  const auto fold = stratified_folds(labels, k, seed);
  CvReport report;
  report.k = k;
  report.seed = seed;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<bool> is_test(features.size());
    for (std::size_t i = 0; i < fold.size(); ++i) is_test[i] = fold[i] == f;
    report.fold_accuracies.push_back(score_fold(features, labels, is_test, trainer));
  }
  std::tie(report.mean, report.std) = mean_and_std(report.fold_accuracies);
  return report;
}

CvReport cross_validate(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                        std::size_t k, const RfConfig& config, std::uint64_t seed) {
  return cross_validate(features, labels, k, forest_trainer(config), seed);
}

CvReport holdout_validate(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                          double test_fraction, const RfConfig& config, std::uint64_t seed) {
  check_dataset(features, labels);
  require(test_fraction > 0.0 && test_fraction < 1.0, "test fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(derive_seed(seed, "cv:holdout"));
  std::vector<bool> is_test(labels.size(), false);
  for (auto& [label, members] : by_class) {
    if (members.size() < 2)
      fail(ErrorKind::InvalidArgument, "class " + std::to_string(label) + " needs two members for a holdout split");
    rng.shuffle(members);
    const auto cut = std::clamp<long long>(std::llround(test_fraction * static_cast<double>(members.size())), 1,
                                           static_cast<long long>(members.size()) - 1);
    for (long long i = 0; i < cut; ++i) is_test[members[static_cast<std::size_t>(i)]] = true;
  }
  CvReport report;
  report.k = 1;
  report.seed = seed;
  report.fold_accuracies.push_back(score_fold(features, labels, is_test, forest_trainer(config)));
  std::tie(report.mean, report.std) = mean_and_std(report.fold_accuracies);
  return report;
}

std::optional<AbstractClass> keyword_baseline(std::string_view text) {
  static const std::pair<std::string_view, AbstractClass> kStems[] = {
      {"character", AbstractClass::Characterization},
      {"model", AbstractClass::Modeling},
      {"process", AbstractClass::Processing},
      {"synthes", AbstractClass::Synthesis},
  };
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (i > 0 && std::isalnum(static_cast<unsigned char>(lower[i - 1]))) continue;
    for (const auto& [stem, cls] : kStems)
      if (lower.compare(i, stem.size(), stem) == 0) return cls;
  }
  return std::nullopt;
}

double baseline_accuracy(const std::vector<RawDocument>& docs) {
  std::size_t correct = 0, total = 0;
  for (const auto& d : docs) {
    if (!d.label) continue;
    const auto truth = parse_abstract_class(*d.label);
    if (!truth) fail(ErrorKind::InvalidData, "document " + d.id + " has unknown label '" + *d.label + "'");
    correct += keyword_baseline(d.text) == truth;
    ++total;
  }
  if (total == 0) fail(ErrorKind::InvalidArgument, "baseline needs labeled documents");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::string cv_report_csv(const std::vector<CvReport>& reports) {
  std::ostringstream out;
  out << "method,fold,accuracy,std\n";
  for (const auto& r : reports) {
    const auto m = io::csv_escape(r.method);
    for (std::size_t f = 0; f < r.fold_accuracies.size(); ++f)
      out << m << ',' << f + 1 << ',' << io::format_double(r.fold_accuracies[f]) << ",\n";
    out << m << ",mean," << io::format_double(r.mean) << ',' << io::format_double(r.std) << '\n';
  }
  return out.str();
}

}  // namespace energetext
