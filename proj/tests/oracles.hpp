#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except to
// read model parameters.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "energetext/embeddings.hpp"
#include "energetext/topic_model.hpp"
#include "energetext/transformer.hpp"

namespace oracle {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("energetext-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Double loop over ordered (center, context) pairs with a directly
/// exponentiated softmax; no log-sum-exp shortcut.
inline double brute_log_probability(const energetext::EmbeddingMatrix& emb, const std::vector<std::size_t>& words,
                                    std::size_t window) {
  const std::size_t V = emb.vocab_size(), d = emb.dim();
  double total = 0.0;
  for (std::size_t j = 0; j < words.size(); ++j) {
    for (std::size_t k = 0; k < words.size(); ++k) {
      const std::size_t gap = j > k ? j - k : k - j;
      if (gap == 0 || gap > window) continue;
      std::vector<double> score(V, 0.0);
      for (std::size_t v = 0; v < V; ++v)
        for (std::size_t c = 0; c < d; ++c) score[v] += emb.output()[v * d + c] * emb.input()[words[j] * d + c];
      double z = 0.0;
      for (double s : score) z += std::exp(s);
      total += std::log(std::exp(score[words[k]]) / z);
    }
  }
  return total;
}

/// Mean over scored positions of -w[t] * log(exp(x_t) / sum exp(x)).
inline double brute_cross_entropy(const std::vector<double>& logits, std::size_t classes,
                                  const std::vector<int>& targets, const std::vector<double>& weights) {
  double total = 0.0;
  std::size_t scored = 0;
  for (std::size_t p = 0; p < targets.size(); ++p) {
    if (targets[p] < 0) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(logits[p * classes + c]);
    const auto t = static_cast<std::size_t>(targets[p]);
    total += -weights[t] * std::log(std::exp(logits[p * classes + t]) / z);
    ++scored;
  }
  return total / static_cast<double>(scored);
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Greedy one-to-one alignment of learned topics to generating topics by
/// top-10 Jaccard; returns the Jaccard achieved by each generating topic.
inline std::vector<double> aligned_top10_jaccard(const energetext::LdaModel& model,
                                                 const std::vector<std::vector<std::string>>& truth) {
  std::vector<std::set<std::string>> learned, gen;
  for (std::size_t k = 0; k < model.num_topics(); ++k) {
    std::set<std::string> s;
    for (const auto& [term, _] : energetext::top_words(model, k, 10)) s.insert(term);
    learned.push_back(s);
  }
  for (const auto& words : truth) gen.emplace_back(words.begin(), words.begin() + 10);

  std::vector<double> out(gen.size(), 0.0);
  std::vector<bool> used_l(learned.size(), false), used_g(gen.size(), false);
  for (std::size_t round = 0; round < std::min(gen.size(), learned.size()); ++round) {
    double best = -1.0;
    std::size_t bg = 0, bl = 0;
    for (std::size_t g = 0; g < gen.size(); ++g)
      for (std::size_t l = 0; l < learned.size(); ++l) {
        if (used_g[g] || used_l[l]) continue;
        const double j = jaccard(gen[g], learned[l]);
        if (j > best) {
          best = j;
          bg = g;
          bl = l;
        }
      }
    used_g[bg] = used_l[bl] = true;
    out[bg] = best;
  }
  return out;
}

/// Average ranks (1-based); ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

inline double population_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / n);
}

/// Fully grown Gini tree that scans every feature and every cut, feature by
/// feature in ascending order. Impurities are recomputed from scratch per cut.
/// Returns the predicted class index for `query`.
inline std::size_t exhaustive_tree_predict(const std::vector<std::vector<double>>& x, const std::vector<std::size_t>& y,
                                           std::size_t classes, std::vector<std::size_t> rows,
                                           const std::vector<double>& query) {
  for (;;) {
    std::vector<std::size_t> counts(classes, 0);
    for (auto r : rows) ++counts[y[r]];
    const std::size_t majority =
        static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1) return majority;

    bool found = false;
    double best_imp = 0.0, best_t = 0.0;
    std::size_t best_f = 0;
    for (std::size_t f = 0; f < x.front().size(); ++f) {
      std::set<double> values;
      for (auto r : rows) values.insert(x[r][f]);
      for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
        const double a = *it, b = *std::next(it);
        double t = a + (b - a) / 2.0;
        if (!(t > a && t < b)) t = a;
        std::vector<double> l(classes, 0.0), rr(classes, 0.0);
        for (auto r : rows) (x[r][f] <= t ? l : rr)[y[r]] += 1.0;
        auto side = [](const std::vector<double>& c) {
          double n = 0.0, sq = 0.0;
          for (double v : c) n += v;
          for (double v : c) sq += (v / n) * (v / n);
          return n * (1.0 - sq);
        };
        const double imp = side(l) + side(rr);
        if (!found || imp < best_imp - 1e-12) {
          found = true;
          best_imp = imp;
          best_f = f;
          best_t = t;
        }
      }
    }
    if (!found) return majority;
    std::vector<std::size_t> next;
    const bool go_left = query[best_f] <= best_t;
    for (auto r : rows)
      if ((x[r][best_f] <= best_t) == go_left) next.push_back(r);
    rows = std::move(next);
  }
}

struct GradCheck {
  double worst_rel = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Central differences on every parameter of `model` against
/// loss_and_gradients. A component counts as matching when the relative error
/// |a - n| / max(|a|, |n|) is small or both magnitudes are below `floor`.
inline GradCheck transformer_grad_check(energetext::TransformerModel model, const energetext::MaskedBatch& batch,
                                        const std::vector<double>& weights, double h, double floor = 1e-8) {
  auto grads = energetext::zeros_like(model.params());
  energetext::loss_and_gradients(model, batch, weights, &grads);
  GradCheck out;
  for (std::size_t t = 0; t < model.params().size(); ++t) {
    auto& data = model.params()[t].data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = energetext::loss_and_gradients(model, batch, weights, nullptr);
      data[i] = saved - h;
      const double down = energetext::loss_and_gradients(model, batch, weights, nullptr);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[t].data[i];
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      const double rel = scale < floor ? 0.0 : std::abs(numeric - analytic) / scale;
      if (rel > out.worst_rel) {
        out.worst_rel = rel;
        out.worst_param = model.params()[t].name + "[" + std::to_string(i) + "]";
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace oracle
