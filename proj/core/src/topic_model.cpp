#include "energetext/topic_model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "energetext/common.hpp"
#include "energetext/io.hpp"

namespace energetext {

using nlohmann::json;

void LdaConfig::validate() const {
  require(num_topics >= 2, "LDA needs at least 2 topics");
  require(alpha > 0.0 && std::isfinite(alpha), "LDA alpha must be positive");
  require(beta > 0.0 && std::isfinite(beta), "LDA beta must be positive");
  require(iterations >= 1, "LDA needs at least one iteration");
  require(burn_in < iterations, "LDA burn_in must be smaller than iterations");
}

LdaModel::LdaModel(LdaConfig config, Vocabulary vocab, std::vector<double> phi)
    : config_(std::move(config)), vocab_(std::move(vocab)), phi_(std::move(phi)) {
  config_.validate();
  const std::size_t V = vocab_.size();
  require(V > 0, "LDA model needs a nonempty vocabulary");
  require(phi_.size() == config_.num_topics * V, "phi has the wrong shape");
  for (std::size_t k = 0; k < config_.num_topics; ++k) {
    double row = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      const double p = phi_[k * V + v];
      if (!(p > 0.0) || !std::isfinite(p)) fail(ErrorKind::InvalidData, "phi entries must be positive and finite");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9) fail(ErrorKind::InvalidData, "phi row " + std::to_string(k) + " does not sum to 1");
  }
}

LdaSampler::LdaSampler(const std::vector<ProcessedDocument>& docs, const Vocabulary& vocab, const LdaConfig& config)
    : K_(config.num_topics), V_(vocab.size()), alpha_(config.alpha), beta_(config.beta),
      rng_(derive_seed(config.seed, "lda:gibbs")) {
  config.validate();
  for (const auto& d : docs) {
    std::vector<std::uint32_t> ids;
    for (auto i : vocab.encode(d.tokens)) ids.push_back(static_cast<std::uint32_t>(i));
    if (ids.empty()) continue;
    total_tokens_ += ids.size();
    words_.push_back(std::move(ids));
  }
  if (total_tokens_ == 0) fail(ErrorKind::InvalidData, "no in-vocabulary tokens in the training documents");

  n_kv_.assign(K_ * V_, 0);
  n_dk_.assign(words_.size() * K_, 0);
  n_k_.assign(K_, 0);
  weights_.resize(K_);
  topics_.resize(words_.size());
  for (std::size_t d = 0; d < words_.size(); ++d) {
    topics_[d].resize(words_[d].size());
    for (std::size_t i = 0; i < words_[d].size(); ++i) {
      const auto k = static_cast<std::uint32_t>(rng_.below(K_));
      topics_[d][i] = k;
      ++n_kv_[k * V_ + words_[d][i]];
      ++n_dk_[d * K_ + k];
      ++n_k_[k];
    }
  }
}

void LdaSampler::sweep() {
  const double vbeta = static_cast<double>(V_) * beta_;
  for (std::size_t d = 0; d < words_.size(); ++d) {
    std::uint32_t* doc_counts = &n_dk_[d * K_];
    for (std::size_t i = 0; i < words_[d].size(); ++i) {
      const std::uint32_t w = words_[d][i];
      std::uint32_t k = topics_[d][i];
      --n_kv_[k * V_ + w];
      --doc_counts[k];
      --n_k_[k];

      double total = 0.0;
      for (std::size_t t = 0; t < K_; ++t) {
        total += (doc_counts[t] + alpha_) * (n_kv_[t * V_ + w] + beta_) / (n_k_[t] + vbeta);
        weights_[t] = total;
      }
      const double u = rng_.uniform() * total;
      k = static_cast<std::uint32_t>(std::upper_bound(weights_.begin(), weights_.end(), u) - weights_.begin());
      if (k >= K_) k = static_cast<std::uint32_t>(K_ - 1);

      topics_[d][i] = k;
      ++n_kv_[k * V_ + w];
      ++doc_counts[k];
      ++n_k_[k];
    }
  }
  ++sweeps_;
}

std::vector<double> LdaSampler::current_phi() const {
  std::vector<double> phi(K_ * V_);
  const double vbeta = static_cast<double>(V_) * beta_;
  for (std::size_t k = 0; k < K_; ++k) {
    const double denom = n_k_[k] + vbeta;
    for (std::size_t v = 0; v < V_; ++v) phi[k * V_ + v] = (n_kv_[k * V_ + v] + beta_) / denom;
  }
  return phi;
}

std::string LdaSampler::check_counts() const {
  std::vector<std::uint32_t> kv(K_ * V_, 0), dk(words_.size() * K_, 0), k_tot(K_, 0);
  for (std::size_t d = 0; d < words_.size(); ++d) {
    for (std::size_t i = 0; i < words_[d].size(); ++i) {
      const auto k = topics_[d][i];
      if (k >= K_) return "assignment out of range in document " + std::to_string(d);
      ++kv[k * V_ + words_[d][i]];
      ++dk[d * K_ + k];
      ++k_tot[k];
    }
  }
  if (kv != n_kv_) return "topic-word counts disagree with assignments";
  if (dk != n_dk_) return "document-topic counts disagree with assignments";
  if (k_tot != n_k_) return "topic totals disagree with assignments";
  const auto sum_kv = std::accumulate(n_kv_.begin(), n_kv_.end(), std::size_t{0});
  if (sum_kv != total_tokens_) return "topic-word counts do not sum to the token count";
  for (std::size_t d = 0; d < words_.size(); ++d) {
    std::size_t len = 0;
    for (std::size_t k = 0; k < K_; ++k) len += n_dk_[d * K_ + k];
    if (len != words_[d].size()) return "document " + std::to_string(d) + " topic counts do not sum to its length";
  }
  return {};
}

LdaModel fit_lda(const std::vector<ProcessedDocument>& docs, const Vocabulary& vocab, const LdaConfig& config) {
  config.validate();
  LdaSampler sampler(docs, vocab, config);
  const std::size_t K = config.num_topics, V = vocab.size();
  std::vector<double> phi_sum(K * V, 0.0);
  std::size_t samples = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    sampler.sweep();
    if (it >= config.burn_in) {
      const auto phi = sampler.current_phi();
      for (std::size_t j = 0; j < phi.size(); ++j) phi_sum[j] += phi[j];
      ++samples;
    }
  }
  for (auto& p : phi_sum) p /= static_cast<double>(samples);
  return LdaModel(config, vocab, std::move(phi_sum));
}

namespace {

std::vector<std::uint32_t> in_vocab_ids(const Vocabulary& vocab, const ProcessedDocument& doc) {
  std::vector<std::uint32_t> ids;
  for (auto i : vocab.encode(doc.tokens)) ids.push_back(static_cast<std::uint32_t>(i));
  return ids;
}

DocTopics fold_in(const LdaModel& model, const std::vector<std::uint32_t>& words, std::size_t iterations,
                  std::uint64_t seed) {
  require(iterations >= 1, "fold-in needs at least one iteration");
  const std::size_t K = model.num_topics();
  const double alpha = model.alpha();
  Rng rng(seed);
  std::vector<std::uint32_t> z(words.size());
  std::vector<double> n_k(K, 0.0), cdf(K), theta_sum(K, 0.0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = static_cast<std::uint32_t>(rng.below(K));
    n_k[z[i]] += 1.0;
  }
  const std::size_t burn = iterations / 4;
  const double denom = static_cast<double>(words.size()) + static_cast<double>(K) * alpha;
  std::size_t samples = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      n_k[z[i]] -= 1.0;
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        total += (n_k[k] + alpha) * model.phi(k, words[i]);
        cdf[k] = total;
      }
      const double u = rng.uniform() * total;
      auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      if (k >= K) k = K - 1;
      z[i] = static_cast<std::uint32_t>(k);
      n_k[k] += 1.0;
    }
    if (it >= burn) {
      for (std::size_t k = 0; k < K; ++k) theta_sum[k] += (n_k[k] + alpha) / denom;
      ++samples;
    }
  }
  DocTopics out;
  out.theta.resize(K);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) total += out.theta[k] = theta_sum[k] / static_cast<double>(samples);
  for (auto& t : out.theta) t /= total;
  return out;
}

}  // namespace

DocTopics infer_doc_topics(const LdaModel& model, const ProcessedDocument& doc, std::size_t iterations,
                           std::uint64_t seed) {
  const auto words = in_vocab_ids(model.vocab(), doc);
  if (words.empty()) fail(ErrorKind::InvalidArgument, "document " + doc.id + " has no in-vocabulary tokens");
  return fold_in(model, words, iterations, seed);
}

std::vector<std::pair<std::string, double>> top_words(const LdaModel& model, std::size_t topic, std::size_t k) {
  require(topic < model.num_topics(), "topic index out of range: " + std::to_string(topic));
  const std::size_t V = model.vocab_size();
  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), 0);
  const auto& vocab = model.vocab();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = model.phi(topic, a), pb = model.phi(topic, b);
    if (pa != pb) return pa > pb;
    return vocab.term(a) < vocab.term(b);
  });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t r = 0; r < std::min(k, V); ++r) out.emplace_back(vocab.term(order[r]), model.phi(topic, order[r]));
  return out;
}

std::vector<std::pair<std::size_t, double>> assigned_topics(const DocTopics& theta, double threshold) {
  require(threshold >= 0.0 && threshold < 1.0, "threshold must lie in [0, 1)");
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t k = 0; k < theta.theta.size(); ++k)
    if (theta.theta[k] > threshold) out.emplace_back(k, theta.theta[k]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

PerplexityResult lda_perplexity(const LdaModel& model, const std::vector<ProcessedDocument>& heldout,
                                std::size_t fold_in_iterations, std::uint64_t seed) {
  require(!heldout.empty(), "perplexity needs at least one held-out document");
  struct DocScore {
    double log_lik = 0.0;
    std::size_t scored = 0, skipped = 0;
  };
  std::vector<DocScore> scores(heldout.size());
  parallel_for(heldout.size(), [&](std::size_t d) {
    const auto& doc = heldout[d];
    const auto words = in_vocab_ids(model.vocab(), doc);
    scores[d].skipped = doc.tokens.size() - words.size();
    if (words.empty()) return;
    const auto theta = fold_in(model, words, fold_in_iterations, derive_seed(seed, doc.id));
    for (auto w : words) {
      double p = 0.0;
      for (std::size_t k = 0; k < model.num_topics(); ++k) p += theta.theta[k] * model.phi(k, w);
      scores[d].log_lik += std::log(p);
    }
    scores[d].scored = words.size();
  });

  PerplexityResult r;
  for (const auto& s : scores) {
    r.log_likelihood += s.log_lik;
    r.scored_tokens += s.scored;
    r.skipped_tokens += s.skipped;
    (s.scored > 0 ? r.scored_documents : r.skipped_documents) += 1;
  }
  if (r.scored_tokens == 0) fail(ErrorKind::InvalidArgument, "no held-out document has in-vocabulary tokens");
  r.perplexity = std::exp(-r.log_likelihood / static_cast<double>(r.scored_tokens));
  if (!std::isfinite(r.perplexity)) fail(ErrorKind::Numeric, "perplexity is not finite");
  return r;
}

namespace {
constexpr int kLdaSchemaVersion = 1;
}

std::string lda_to_json(const LdaModel& model) {
  const auto& c = model.config();
  json j;
  j["schema_version"] = kLdaSchemaVersion;
  j["kind"] = "lda";
  j["config"] = {{"num_topics", c.num_topics}, {"alpha", c.alpha}, {"beta", c.beta},
                 {"iterations", c.iterations}, {"burn_in", c.burn_in}, {"seed", c.seed}};
  j["vocab_hash"] = model.vocab().hash();
  j["vocab"] = {{"terms", model.vocab().terms()},
                {"counts", model.vocab().counts()},
                {"min_count", model.vocab().min_count()}};
  j["phi"] = {{"rows", model.num_topics()},
              {"cols", model.vocab_size()},
              {"encoding", "base64-f64le"},
              {"data", io::base64_encode(io::pack_f64(model.phi()))}};
  return j.dump(1) + "\n";
}

LdaModel lda_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != kLdaSchemaVersion)
      fail(ErrorKind::InvalidData, "unsupported LDA schema version");
    const auto& c = j.at("config");
    LdaConfig config;
    config.num_topics = c.at("num_topics").get<std::size_t>();
    config.alpha = c.at("alpha").get<double>();
    config.beta = c.at("beta").get<double>();
    config.iterations = c.at("iterations").get<std::size_t>();
    config.burn_in = c.at("burn_in").get<std::size_t>();
    config.seed = c.at("seed").get<std::uint64_t>();
    Vocabulary vocab(j.at("vocab").at("terms").get<std::vector<std::string>>(),
                     j.at("vocab").at("counts").get<std::vector<std::uint64_t>>(),
                     j.at("vocab").at("min_count").get<std::uint64_t>());
    if (vocab.hash() != j.at("vocab_hash").get<std::string>())
      fail(ErrorKind::InvalidData, "LDA vocabulary hash mismatch");
    const auto& p = j.at("phi");
    if (p.at("encoding").get<std::string>() != "base64-f64le") fail(ErrorKind::InvalidData, "unknown phi encoding");
    auto phi = io::unpack_f64(io::base64_decode(p.at("data").get<std::string>()));
    if (p.at("rows").get<std::size_t>() != config.num_topics || p.at("cols").get<std::size_t>() != vocab.size())
      fail(ErrorKind::InvalidData, "phi shape does not match config and vocabulary");
    return LdaModel(config, std::move(vocab), std::move(phi));
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("malformed LDA model: ") + e.what());
  }
}

void save_lda(const LdaModel& model, const std::filesystem::path& path) { io::write_file(path, lda_to_json(model)); }

LdaModel load_lda(const std::filesystem::path& path) { return lda_from_json(io::read_file(path)); }

std::string topic_report_csv(const LdaModel& model, std::size_t k) {
  std::string out = "topic,rank,term,probability\n";
  for (std::size_t t = 0; t < model.num_topics(); ++t) {
    const auto words = top_words(model, t, k);
    for (std::size_t r = 0; r < words.size(); ++r) {
      out += std::to_string(t) + "," + std::to_string(r + 1) + "," + io::csv_escape(words[r].first) + "," +
             io::format_double(words[r].second) + "\n";
    }
  }
  return out;
}

}  // namespace energetext
