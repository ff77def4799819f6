#include <doctest.h>

#include <algorithm>
#include <map>

#include "energetext/classify.hpp"
#include "energetext/common.hpp"
#include "energetext/mlm.hpp"
#include "energetext/rng.hpp"
#include "oracles.hpp"

using namespace energetext;

namespace {

struct Dataset {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

Dataset random_dataset(std::size_t n, std::size_t d, int classes, std::uint64_t seed, bool integer_grid = false) {
  Rng rng(seed);
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (auto& v : row) v = integer_grid ? static_cast<double>(rng.below(6)) : rng.uniform(-1.0, 1.0);
    ds.x.push_back(row);
    ds.y.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
  }
  return ds;
}

double training_accuracy(const RandomForest& f, const Dataset& ds) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.x.size(); ++i) ok += rf_predict(f, ds.x[i]) == ds.y[i];
  return static_cast<double>(ok) / static_cast<double>(ds.x.size());
}

DecisionTree leaf(std::vector<std::size_t> counts) {
  DecisionTree t;
  TreeNode n;
  n.counts = std::move(counts);
  t.nodes.push_back(n);
  return t;
}

RfConfig exact_config(std::size_t trees = 1) {
  RfConfig c;
  c.trees = trees;
  c.bootstrap = false;
  return c;
}

EmbeddingMatrix small_embedding() {
  W2vConfig c;
  c.dim = 3;
  Rng rng(1);
  std::vector<double> in(5 * 3), out(5 * 3, 0.0);
  for (auto& v : in) v = rng.uniform(-1, 1);
  return EmbeddingMatrix(c, Vocabulary({"a", "b", "c", "d", "e"}, {5, 4, 3, 2, 1}, 1), in, out);
}

}  // namespace

TEST_SUITE("classify") {
  TEST_CASE("feature method names") {
    CHECK(to_string(FeatureMethod::W2vMean) == "w2v-mean");
    CHECK(parse_feature_method("lda-theta") == FeatureMethod::LdaTheta);
    CHECK(parse_feature_method("transformer") == FeatureMethod::TransformerMean);
    CHECK_THROWS_AS(parse_feature_method("tfidf"), Error);
  }

  TEST_CASE("sign of x is learned exactly") {
    Dataset ds;
    for (int i = -10; i < 10; ++i) {
      const double x = i < 0 ? i : i + 1;
      ds.x.push_back({x});
      ds.y.push_back(x < 0 ? 0 : 1);
    }
    RfConfig c;
    c.trees = 10;
    CHECK(training_accuracy(fit_random_forest(ds.x, ds.y, c), ds) == 1.0);
  }

  TEST_CASE("unique samples are fit perfectly without bootstrap") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto ds = random_dataset(120, 5, 4, seed);
      CHECK(training_accuracy(fit_random_forest(ds.x, ds.y, exact_config(15)), ds) == 1.0);
    }
    // XOR corners: no first cut lowers impurity, so zero-gain cuts must be taken.
    Dataset xr{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0}};
    CHECK(training_accuracy(fit_random_forest(xr.x, xr.y, exact_config()), xr) == 1.0);
  }

  TEST_CASE("single-tree forest equals the exhaustive tree") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const bool grid = seed % 2 == 0;
      const auto ds = random_dataset(40, 2, 3, seed, grid);
      auto cfg = exact_config();
      cfg.seed = seed * 13;
      const auto forest = fit_random_forest(ds.x, ds.y, cfg);
      std::vector<std::size_t> y(ds.y.begin(), ds.y.end()), rows(ds.x.size());
      std::iota(rows.begin(), rows.end(), 0);
      // Class codes here are 0..2, so class index equals code when all appear.
      REQUIRE(forest.classes() == std::vector<int>{0, 1, 2});
      std::vector<std::vector<double>> probes = ds.x;
      Rng rng(seed);
      for (int i = 0; i < 200; ++i) probes.push_back({rng.uniform(-1.2, 6.2), rng.uniform(-1.2, 6.2)});
      for (const auto& p : probes)
        CHECK(rf_predict(forest, p) == static_cast<int>(oracle::exhaustive_tree_predict(ds.x, y, 3, rows, p)));
    }
  }

  TEST_CASE("tree structure invariants") {
    const auto ds = random_dataset(80, 3, 3, 7, true);
    const auto forest = fit_random_forest(ds.x, ds.y, exact_config(5));
    for (const auto& tree : forest.trees()) {
      std::vector<std::size_t> total(tree.nodes.size());
      for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        std::size_t sum = 0;
        for (auto c : n.counts) sum += c;
        total[i] = sum;
        if (n.is_leaf()) continue;
        const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
        const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
        for (std::size_t c = 0; c < n.counts.size(); ++c) CHECK(l.counts[c] + r.counts[c] == n.counts[c]);
        bool below = false, above = false;
        for (const auto& row : ds.x) {
          below |= row[static_cast<std::size_t>(n.feature)] < n.threshold;
          above |= row[static_cast<std::size_t>(n.feature)] > n.threshold;
        }
        CHECK(below);
        CHECK(above);
      }
      CHECK(total[0] == ds.x.size());
    }
  }

  TEST_CASE("seeded forests are reproducible") {
    const auto ds = random_dataset(60, 4, 3, 8);
    RfConfig c;
    c.trees = 20;
    c.seed = 99;
    const auto a = fit_random_forest(ds.x, ds.y, c);
    const auto b = fit_random_forest(ds.x, ds.y, c);
    CHECK(forest_to_json(a) == forest_to_json(b));
    const auto probe = random_dataset(50, 4, 3, 9);
    for (const auto& p : probe.x) CHECK(rf_predict(a, p) == rf_predict(b, p));
    const auto back = forest_from_json(forest_to_json(a));
    CHECK(forest_to_json(back) == forest_to_json(a));
    for (const auto& p : probe.x) CHECK(rf_predict(back, p) == rf_predict(a, p));
  }

  TEST_CASE("vote ties go to the smallest class code") {
    const RandomForest tie(RfConfig{}, {0, 1}, 1, {leaf({1, 0}), leaf({0, 1})});
    CHECK(rf_predict(tie, {0.0}) == 0);
    const RandomForest reversed(RfConfig{}, {0, 1}, 1, {leaf({0, 1}), leaf({1, 0})});
    CHECK(rf_predict(reversed, {0.0}) == 0);
    const RandomForest codes(RfConfig{}, {2, 5, 7}, 1, {leaf({0, 0, 3}), leaf({0, 2, 0})});
    CHECK(rf_predict(codes, {0.0}) == 5);
    const RandomForest unanimous(RfConfig{}, {0, 1, 2, 3}, 1, {leaf({0, 1, 0, 0}), leaf({0, 4, 1, 0})});
    CHECK(rf_predict(unanimous, {0.0}) == static_cast<int>(AbstractClass::Modeling));
    CHECK(leaf({2, 2}).predict_index({0.0}) == 0);
    CHECK_THROWS_AS(rf_predict(tie, {0.0, 1.0}), Error);
  }

  TEST_CASE("votes commute with tree order") {
    const auto ds = random_dataset(60, 3, 4, 10);
    RfConfig c;
    c.trees = 9;
    const auto forest = fit_random_forest(ds.x, ds.y, c);
    auto trees = forest.trees();
    Rng rng(3);
    for (int rep = 0; rep < 5; ++rep) {
      rng.shuffle(trees);
      const RandomForest shuffled(forest.config(), forest.classes(), forest.num_features(), trees);
      for (const auto& p : random_dataset(40, 3, 4, 11 + rep).x) {
        CHECK(shuffled.votes(p) == forest.votes(p));
        CHECK(rf_predict(shuffled, p) == rf_predict(forest, p));
      }
    }
  }

  TEST_CASE("forest preconditions") {
    CHECK_THROWS_AS(fit_random_forest({{1.0}, {2.0}}, {3, 3}, RfConfig{}), Error);
    CHECK_THROWS_AS(fit_random_forest({{1.0}, {2.0, 3.0}}, {0, 1}, RfConfig{}), Error);
    RfConfig none;
    none.trees = 0;
    CHECK_THROWS_AS(none.validate(), Error);
  }

  TEST_CASE("stratified folds partition and balance") {
    for (int classes = 2; classes <= 4; ++classes)
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Rng rng(seed + 100 * static_cast<std::uint64_t>(classes));
        std::vector<int> labels;
        std::map<int, std::size_t> sizes;
        for (int c = 0; c < classes; ++c) {
          const auto n = 20 + rng.below(21);
          sizes[c * 3] = n;
          for (std::size_t i = 0; i < n; ++i) labels.push_back(c * 3);
        }
        rng.shuffle(labels);
        const auto fold = stratified_folds(labels, 5, seed);
        REQUIRE(fold.size() == labels.size());
        for (const auto& [label, n] : sizes) {
          std::vector<std::size_t> per(5, 0);
          for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) ++per[fold[i]];
          const auto [lo, hi] = std::minmax_element(per.begin(), per.end());
          CHECK(*hi - *lo <= 1);
          CHECK(*lo == n / 5);
        }
        for (auto f : fold) CHECK(f < 5);
      }
    CHECK_THROWS_AS(stratified_folds({0, 0, 0, 1, 1, 1, 1, 1}, 5, 1), Error);
  }

  TEST_CASE("cross-validation on separable data and the counting oracle") {
    Dataset ds;
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
      const int y = i % 2;
      ds.x.push_back({y * 10.0 + rng.uniform(), rng.uniform()});
      ds.y.push_back(y);
    }
    RfConfig c;
    c.trees = 25;
    const auto r = cross_validate(ds.x, ds.y, 5, c, 7);
    CHECK(r.mean >= 0.95);
    CHECK(r.fold_accuracies.size() == 5);

    // A model that always answers 1 scores exactly the share of 1s in each fold.
    std::vector<int> labels;
    for (int i = 0; i < 23; ++i) labels.push_back(0);
    for (int i = 0; i < 31; ++i) labels.push_back(1);
    for (int i = 0; i < 26; ++i) labels.push_back(2);
    std::vector<std::vector<double>> x(labels.size(), std::vector<double>{0.0});
    const Trainer always_one = [](const auto&, const auto&) -> Predictor { return [](const auto&) { return 1; }; };
    const auto deg = cross_validate(x, labels, 5, always_one, 21);
    const auto fold = stratified_folds(labels, 5, 21);
    for (std::size_t f = 0; f < 5; ++f) {
      std::size_t ones = 0, total = 0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (fold[i] == f) {
          ++total;
          ones += labels[i] == 1;
        }
      CHECK(deg.fold_accuracies[f] == static_cast<double>(ones) / static_cast<double>(total));
    }
    CHECK(std::abs(deg.std - oracle::population_std(deg.fold_accuracies)) < 1e-12);
  }

  TEST_CASE("holdout and report formatting") {
    const auto ds = random_dataset(60, 2, 2, 12);
    RfConfig c;
    c.trees = 5;
    const auto h = holdout_validate(ds.x, ds.y, 0.33, c, 1);
    CHECK(h.fold_accuracies.size() == 1);
    CHECK(h.std == 0.0);
    CvReport r;
    r.method = "w2v-mean";
    r.fold_accuracies = {0.5, 0.75, 1.0, 0.25, 0.5};
    std::tie(r.mean, r.std) = mean_and_std(r.fold_accuracies);
    CHECK(r.mean == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(std::abs(r.std - oracle::population_std(r.fold_accuracies)) < 1e-12);
    const auto csv = cv_report_csv({r});
    CHECK(csv.rfind("method,fold,accuracy,std\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.find("w2v-mean,mean,") != std::string::npos);
  }

  TEST_CASE("keyword baseline") {
    CHECK(keyword_baseline("We present a modeling study of RDX synthesis") == AbstractClass::Modeling);
    CHECK_FALSE(keyword_baseline("Thermal decomposition of HMX").has_value());
    CHECK(keyword_baseline("Synthesis and CHARACTERIZATION") == AbstractClass::Synthesis);
    CHECK(keyword_baseline("SYNTHESIS AND CHARACTERIZATION") == keyword_baseline("synthesis and characterization"));
    CHECK(keyword_baseline("a remodeled reactor was processed") == AbstractClass::Processing);
    std::vector<RawDocument> docs{{"1", "", "modeling of cracks", std::string("modeling")},
                                  {"2", "", "no keyword at all", std::string("synthesis")},
                                  {"3", "", "processing route", std::string("synthesis")},
                                  {"4", "", "characterization only", std::nullopt}};
    CHECK(baseline_accuracy(docs) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("w2v mean features") {
    const auto emb = small_embedding();
    const auto one = featurize_w2v(emb, ProcessedDocument{"x", {"c"}, std::nullopt});
    CHECK(std::equal(one.values.begin(), one.values.end(), emb.input_row(2).begin()));
    const auto two = featurize_w2v(emb, ProcessedDocument{"x", {"a", "b", "zz"}, std::nullopt});
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(two.values[j] - (emb.input_row(0)[j] + emb.input_row(1)[j]) / 2.0) < 1e-12);
    ProcessedDocument twenty{"t", {}, AbstractClass::Synthesis};
    Rng rng(2);
    std::vector<double> sum(3, 0.0);
    for (int i = 0; i < 20; ++i) {
      const auto v = rng.below(5);
      twenty.tokens.push_back(emb.vocab().term(v));
      for (std::size_t j = 0; j < 3; ++j) sum[j] += emb.input()[v * 3 + j];
    }
    const auto f = featurize_w2v(emb, twenty);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(f.values[j] - sum[j] / 20.0) < 1e-12);
    CHECK(f.label == AbstractClass::Synthesis);
    CHECK_THROWS_AS(featurize_w2v(emb, ProcessedDocument{"x", {"zz"}, std::nullopt}), Error);
  }

  TEST_CASE("lda theta features") {
    std::vector<double> phi(2 * 6, 1e-6);
    for (int v = 0; v < 3; ++v) phi[static_cast<std::size_t>(v)] = 1.0;
    for (int v = 3; v < 6; ++v) phi[static_cast<std::size_t>(6 + v)] = 1.0;
    for (int k = 0; k < 2; ++k) {
      double s = 0.0;
      for (int v = 0; v < 6; ++v) s += phi[static_cast<std::size_t>(k * 6 + v)];
      for (int v = 0; v < 6; ++v) phi[static_cast<std::size_t>(k * 6 + v)] /= s;
    }
    LdaConfig c;
    c.num_topics = 2;
    const LdaModel m(c, Vocabulary({"a", "b", "c", "d", "e", "f"}, std::vector<std::uint64_t>(6, 1), 1), phi);
    const auto f = featurize_lda(m, ProcessedDocument{"x", {"a", "b", "c", "a", "b", "c", "a", "b", "c", "a", "b", "c", "a", "b", "c", "a", "b", "c"}, std::nullopt}, 100, 3);
    REQUIRE(f.values.size() == 2);
    CHECK(f.values[0] > 0.9);
    CHECK(f.values[1] < 0.1);
  }

  TEST_CASE("transformer mean features") {
    TransformerConfig c;
    c.layers = 1;
    c.heads = 2;
    c.d_model = 8;
    c.d_ff = 16;
    c.max_seq = 16;
    const auto tok = train_bpe({"shock wave front", "wave shock"}, 40);
    c.vocab_size = tok.size();
    const TransformerModel m(c);
    const RawDocument doc{"d", "", "shock wave front wave", std::string("modeling")};
    const auto f = featurize_transformer(m, tok, doc);
    CHECK(f.values.size() == 8);
    CHECK(f.label == AbstractClass::Modeling);

    // Same tokens as a padded second row of a batch give the same mean.
    const auto seq = encode_sequences(tok, {doc.text}, c.max_seq).front();
    auto longer = seq;
    longer.insert(longer.end() - 1, 3, 7);
    const auto h = hidden_states(m, make_batch({longer, seq}));
    const std::size_t S = longer.size();
    std::vector<double> mean(8, 0.0);
    std::size_t n = 0;
    for (std::size_t s = 0; s < seq.size(); ++s) {
      if (BpeTokenizer::is_special(seq[s])) continue;
      for (std::size_t j = 0; j < 8; ++j) mean[j] += h[(S + s) * 8 + j];
      ++n;
    }
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(mean[j] / static_cast<double>(n) - f.values[j]) < 1e-6);

    const RawDocument single{"s", "", "shock", std::nullopt};
    const auto ids = encode_sequences(tok, {single.text}, c.max_seq).front();
    REQUIRE(ids.size() == 3);
    const auto hs = hidden_states(m, make_batch({ids}));
    const auto fs = featurize_transformer(m, tok, single);
    for (std::size_t j = 0; j < 8; ++j) CHECK(fs.values[j] == hs[8 + j]);
  }

  TEST_CASE("features csv round trip") {
    std::vector<FeatureVector> fv{{"a,1", FeatureMethod::W2vMean, {0.1, -2.5e-7}, AbstractClass::Processing},
                                  {"b", FeatureMethod::W2vMean, {3.0, 4.0}, std::nullopt}};
    const auto back = parse_features_csv(features_csv(fv));
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == "a,1");
    CHECK(back[0].values == fv[0].values);
    CHECK(back[0].label == AbstractClass::Processing);
    CHECK_FALSE(back[1].label.has_value());
    CHECK(back[1].method == FeatureMethod::W2vMean);
  }
}
