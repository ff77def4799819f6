#include "energetext/transformer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>

#include "energetext/common.hpp"
#include "energetext/io.hpp"
#include "energetext/rng.hpp"

namespace energetext {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;
using RowVecC = Eigen::Map<const Eigen::RowVectorXd>;
using RowVecM = Eigen::Map<Eigen::RowVectorXd>;

constexpr double kLnEps = 1e-12;

enum LayerSlot : std::size_t {
  kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo, kLn1G, kLn1B, kW1, kB1, kW2, kB2, kLn2G, kLn2B,
};

constexpr const char* kSlotNames[] = {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                                      "ln1_g", "ln1_b", "w1", "b1", "w2", "b2", "ln2_g", "ln2_b"};

MapC mat(const Tensor& t) { return MapC(t.data.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1])); }
MapM mat(Tensor& t) { return MapM(t.data.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1])); }
RowVecC vec(const Tensor& t) { return RowVecC(t.data.data(), static_cast<Eigen::Index>(t.data.size())); }
RowVecM vec(Tensor& t) { return RowVecM(t.data.data(), static_cast<Eigen::Index>(t.data.size())); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) +
         x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

void TransformerConfig::validate() const {
  require(layers >= 1, "transformer needs at least one layer");
  require(heads >= 1 && d_model % heads == 0, "d_model must be divisible by heads");
  require(d_ff >= 1, "d_ff must be positive");
  require(max_seq >= 2, "max_seq must be at least 2");
  require(vocab_size > 5, "vocabulary must hold more than the special tokens");
  require(mask_fraction > 0.0 && mask_fraction <= 1.0, "mask fraction must lie in (0, 1]");
  require(batch_size >= 1, "batch size must be positive");
  require(initial_lr > 0.0, "learning rate must be positive");
  require(init_scale > 0.0, "init scale must be positive");
}

TransformerConfig TransformerConfig::desk() { return TransformerConfig{}; }

TransformerConfig TransformerConfig::full_scale() {
  TransformerConfig c;
  c.layers = 6;
  c.heads = 12;
  c.d_model = 768;
  c.d_ff = 3072;
  c.max_seq = 512;
  c.vocab_size = 30522;
  c.batch_size = 32;
  c.epochs = 100;
  return c;
}

TransformerModel::TransformerModel(const TransformerConfig& config) : config_(config) {
  config_.validate();
  const std::size_t C = config_.vocab_size, D = config_.d_model, F = config_.d_ff, S = config_.max_seq;
  Rng rng(derive_seed(config_.seed, "mlm:init"));
  auto weights = [&](std::string name, std::size_t r, std::size_t c) {
    Tensor t{std::move(name), {r, c}, std::vector<double>(r * c)};
    for (auto& x : t.data) x = rng.normal(0.0, config_.init_scale);
    return t;
  };
  auto constant = [](std::string name, std::size_t n, double v) { return Tensor{std::move(name), {n}, std::vector<double>(n, v)}; };

  params_.push_back(weights("tok_emb", C, D));
  params_.push_back(weights("pos_emb", S, D));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = std::to_string(l) + ".";
    params_.push_back(weights(p + "wq", D, D));
    params_.push_back(constant(p + "bq", D, 0.0));
    params_.push_back(weights(p + "wk", D, D));
    params_.push_back(constant(p + "bk", D, 0.0));
    params_.push_back(weights(p + "wv", D, D));
    params_.push_back(constant(p + "bv", D, 0.0));
    params_.push_back(weights(p + "wo", D, D));
    params_.push_back(constant(p + "bo", D, 0.0));
    params_.push_back(constant(p + "ln1_g", D, 1.0));
    params_.push_back(constant(p + "ln1_b", D, 0.0));
    params_.push_back(weights(p + "w1", D, F));
    params_.push_back(constant(p + "b1", F, 0.0));
    params_.push_back(weights(p + "w2", F, D));
    params_.push_back(constant(p + "b2", D, 0.0));
    params_.push_back(constant(p + "ln2_g", D, 1.0));
    params_.push_back(constant(p + "ln2_b", D, 0.0));
  }
  params_.push_back(constant("out_bias", C, 0.0));
}

TransformerModel::TransformerModel(const TransformerConfig& config, std::vector<Tensor> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  const TransformerModel reference_shape = [&] {
    TransformerConfig c = config_;
    return TransformerModel(c);
  }();
  if (params_.size() != reference_shape.params_.size()) fail(ErrorKind::InvalidData, "transformer has the wrong tensor count");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& want = reference_shape.params_[i];
    if (params_[i].name != want.name || params_[i].shape != want.shape || params_[i].data.size() != want.data.size())
      fail(ErrorKind::InvalidData, "tensor " + want.name + " is missing or has the wrong shape");
    for (double x : params_[i].data)
      if (!std::isfinite(x)) fail(ErrorKind::InvalidData, "tensor " + want.name + " has non-finite entries");
  }
}

const Tensor& TransformerModel::param(const std::string& name) const {
  for (const auto& t : params_)
    if (t.name == name) return t;
  fail(ErrorKind::InvalidArgument, "no tensor named " + name);
}

Tensor& TransformerModel::param(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const TransformerModel&>(*this).param(name));
}

std::size_t TransformerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.data.size();
  return n;
}

std::vector<Tensor> zeros_like(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& t : params) out.push_back(Tensor{t.name, t.shape, std::vector<double>(t.data.size(), 0.0)});
  return out;
}

MaskedBatch make_batch(const std::vector<std::vector<int>>& inputs, const std::vector<std::vector<int>>& targets) {
  require(!inputs.empty(), "batch needs at least one row");
  require(targets.empty() || targets.size() == inputs.size(), "targets must match inputs row for row");
  MaskedBatch b;
  b.batch = inputs.size();
  for (const auto& r : inputs) b.seq = std::max(b.seq, r.size());
  require(b.seq > 0, "batch rows are all empty");
  b.input_ids.assign(b.batch * b.seq, 0);
  b.target_ids.assign(b.batch * b.seq, -1);
  b.attention_mask.assign(b.batch * b.seq, 0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    for (std::size_t s = 0; s < inputs[i].size(); ++s) {
      b.input_ids[i * b.seq + s] = inputs[i][s];
      b.attention_mask[i * b.seq + s] = inputs[i][s] != 0;
    }
    if (!targets.empty()) {
      require(targets[i].size() == inputs[i].size(), "target row length differs from input row");
      for (std::size_t s = 0; s < targets[i].size(); ++s) b.target_ids[i * b.seq + s] = targets[i][s];
    }
  }
  return b;
}

namespace {

struct LayerCache {
  RowMat x_in, q, k, v, o, xhat1, y, pre, act, xhat2, z;
  std::vector<RowMat> attn;
  Eigen::VectorXd rstd1, rstd2;
};

struct SeqCache {
  std::vector<LayerCache> layers;
};

RowMat ln_forward(const RowMat& x, const Tensor& g, const Tensor& b, RowMat& xhat, Eigen::VectorXd& rstd) {
  const auto n = x.rows();
  const auto d = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mu).square().sum() / d;
    rstd(i) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mu) * rstd(i);
  }
  RowMat y = xhat.array().rowwise() * vec(g).array();
  y.rowwise() += vec(b);
  return y;
}

RowMat ln_backward(const RowMat& dy, const RowMat& xhat, const Eigen::VectorXd& rstd, const Tensor& g, Tensor* dg,
                   Tensor* db) {
  const auto d = static_cast<double>(dy.cols());
  if (dg) vec(*dg) += (dy.array() * xhat.array()).colwise().sum().matrix();
  if (db) vec(*db) += dy.colwise().sum();
  RowMat dxhat = dy.array().rowwise() * vec(g).array();
  RowMat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dxhat = dxhat.row(i).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(i).dot(xhat.row(i)) / d;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat);
  }
  return dx;
}

void check_batch(const TransformerConfig& c, const MaskedBatch& batch) {
  require(batch.batch >= 1 && batch.seq >= 1, "empty batch");
  if (batch.seq > c.max_seq)
    fail(ErrorKind::InvalidArgument, "sequence length " + std::to_string(batch.seq) + " exceeds max_seq " + std::to_string(c.max_seq));
  require(batch.input_ids.size() == batch.batch * batch.seq && batch.attention_mask.size() == batch.input_ids.size(),
          "batch arrays have inconsistent sizes");
  for (int id : batch.input_ids)
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size)
      fail(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(c.vocab_size));
}

// Forward pass of one sequence; returns the final hidden states (S x D).
RowMat forward_sequence(const TransformerModel& model, const int* ids, const std::uint8_t* valid, std::size_t S,
                        SeqCache& cache, std::vector<std::vector<double>>* attn_out = nullptr) {
  const auto& cfg = model.config();
  const auto& P = model.params();
  const std::size_t D = cfg.d_model, H = cfg.heads, dh = D / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto E = mat(P[0]);
  const auto pos = mat(P[1]);

  RowMat x(S, D);
  for (std::size_t s = 0; s < S; ++s) x.row(static_cast<Eigen::Index>(s)) = E.row(ids[s]) + pos.row(static_cast<Eigen::Index>(s));

  cache.layers.resize(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t base = model.layer_base(l);
    auto& c = cache.layers[l];
    c.x_in = x;
    c.q = (x * mat(P[base + kWq])).rowwise() + vec(P[base + kBq]);
    c.k = (x * mat(P[base + kWk])).rowwise() + vec(P[base + kBk]);
    c.v = (x * mat(P[base + kWv])).rowwise() + vec(P[base + kBv]);
    c.o.resize(S, D);
    c.attn.resize(H);
    for (std::size_t h = 0; h < H; ++h) {
      const auto off = static_cast<Eigen::Index>(h * dh), w = static_cast<Eigen::Index>(dh);
      RowMat scores = c.q.middleCols(off, w) * c.k.middleCols(off, w).transpose() * scale;
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < scores.cols(); ++j)
          if (valid[j]) mx = std::max(mx, scores(i, j));
        double sum = 0.0;
        for (Eigen::Index j = 0; j < scores.cols(); ++j) {
          scores(i, j) = valid[j] ? std::exp(scores(i, j) - mx) : 0.0;
          sum += scores(i, j);
        }
        scores.row(i) /= sum;
      }
      c.o.middleCols(off, w) = scores * c.v.middleCols(off, w);
      if (attn_out) attn_out->emplace_back(scores.data(), scores.data() + scores.size());
      c.attn[h] = std::move(scores);
    }
    RowMat r1 = x + ((c.o * mat(P[base + kWo])).rowwise() + vec(P[base + kBo]));
    c.y = ln_forward(r1, P[base + kLn1G], P[base + kLn1B], c.xhat1, c.rstd1);
    c.pre = (c.y * mat(P[base + kW1])).rowwise() + vec(P[base + kB1]);
    c.act = c.pre.unaryExpr([](double v) { return gelu(v); });
    RowMat r2 = c.y + ((c.act * mat(P[base + kW2])).rowwise() + vec(P[base + kB2]));
    c.z = ln_forward(r2, P[base + kLn2G], P[base + kLn2B], c.xhat2, c.rstd2);
    x = c.z;
  }
  return x;
}

// Backpropagates dZ (gradient w.r.t. the final hidden states) into grads.
void backward_sequence(const TransformerModel& model, const int* ids, std::size_t S, const SeqCache& cache, RowMat dx,
                       std::vector<Tensor>& G) {
  const auto& cfg = model.config();
  const auto& P = model.params();
  const std::size_t D = cfg.d_model, H = cfg.heads, dh = D / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (std::size_t li = cfg.layers; li-- > 0;) {
    const std::size_t base = model.layer_base(li);
    const auto& c = cache.layers[li];

    RowMat dr2 = ln_backward(dx, c.xhat2, c.rstd2, P[base + kLn2G], &G[base + kLn2G], &G[base + kLn2B]);
    mat(G[base + kW2]) += c.act.transpose() * dr2;
    vec(G[base + kB2]) += dr2.colwise().sum();
    RowMat dpre = (dr2 * mat(P[base + kW2]).transpose()).array() * c.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    mat(G[base + kW1]) += c.y.transpose() * dpre;
    vec(G[base + kB1]) += dpre.colwise().sum();
    RowMat dy = dr2 + dpre * mat(P[base + kW1]).transpose();

    RowMat dr1 = ln_backward(dy, c.xhat1, c.rstd1, P[base + kLn1G], &G[base + kLn1G], &G[base + kLn1B]);
    mat(G[base + kWo]) += c.o.transpose() * dr1;
    vec(G[base + kBo]) += dr1.colwise().sum();
    RowMat d_o = dr1 * mat(P[base + kWo]).transpose();

    RowMat dq(S, D), dk(S, D), dv(S, D);
    for (std::size_t h = 0; h < H; ++h) {
      const auto off = static_cast<Eigen::Index>(h * dh), w = static_cast<Eigen::Index>(dh);
      const RowMat& A = c.attn[h];
      const RowMat dO = d_o.middleCols(off, w);
      RowMat dA = dO * c.v.middleCols(off, w).transpose();
      dv.middleCols(off, w) = A.transpose() * dO;
      RowMat dS = A.array() * (dA.colwise() - (dA.array() * A.array()).rowwise().sum().matrix()).array();
      dS *= scale;
      dq.middleCols(off, w) = dS * c.k.middleCols(off, w);
      dk.middleCols(off, w) = dS.transpose() * c.q.middleCols(off, w);
    }
    mat(G[base + kWq]) += c.x_in.transpose() * dq;
    mat(G[base + kWk]) += c.x_in.transpose() * dk;
    mat(G[base + kWv]) += c.x_in.transpose() * dv;
    vec(G[base + kBq]) += dq.colwise().sum();
    vec(G[base + kBk]) += dk.colwise().sum();
    vec(G[base + kBv]) += dv.colwise().sum();
    dx = dr1 + dq * mat(P[base + kWq]).transpose() + dk * mat(P[base + kWk]).transpose() +
         dv * mat(P[base + kWv]).transpose();
  }

  auto dE = mat(G[0]);
  auto dpos = mat(G[1]);
  for (std::size_t s = 0; s < S; ++s) {
    dE.row(ids[s]) += dx.row(static_cast<Eigen::Index>(s));
    dpos.row(static_cast<Eigen::Index>(s)) += dx.row(static_cast<Eigen::Index>(s));
  }
}

}  // namespace

Logits forward(const TransformerModel& model, const MaskedBatch& batch, AttentionTrace* trace) {
  const auto& cfg = model.config();
  check_batch(cfg, batch);
  const std::size_t S = batch.seq, C = cfg.vocab_size;
  Logits out{batch.batch, S, C, std::vector<double>(batch.batch * S * C)};
  const auto E = mat(model.params()[0]);
  const auto bias = vec(model.params().back());
  if (trace) {
    trace->weights.assign(cfg.layers, std::vector<std::vector<std::vector<double>>>(batch.batch));
  }
  for (std::size_t b = 0; b < batch.batch; ++b) {
    SeqCache cache;
    std::vector<std::vector<double>> attn;
    RowMat z = forward_sequence(model, &batch.input_ids[b * S], &batch.attention_mask[b * S], S, cache,
                                trace ? &attn : nullptr);
    MapM logits(out.data.data() + b * S * C, static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(C));
    logits = (z * E.transpose()).rowwise() + bias;
    if (trace) {
      for (std::size_t l = 0; l < cfg.layers; ++l)
        for (std::size_t h = 0; h < cfg.heads; ++h) trace->weights[l][b].push_back(std::move(attn[l * cfg.heads + h]));
    }
  }
  return out;
}

std::vector<double> hidden_states(const TransformerModel& model, const MaskedBatch& batch) {
  const auto& cfg = model.config();
  check_batch(cfg, batch);
  const std::size_t S = batch.seq, D = cfg.d_model;
  std::vector<double> out(batch.batch * S * D);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    SeqCache cache;
    RowMat z = forward_sequence(model, &batch.input_ids[b * S], &batch.attention_mask[b * S], S, cache);
    std::copy(z.data(), z.data() + z.size(), out.begin() + static_cast<std::ptrdiff_t>(b * S * D));
  }
  return out;
}

double cross_entropy_loss(const Logits& logits, const std::vector<int>& targets, const std::vector<double>& class_weights) {
  const std::size_t C = logits.classes;
  require(targets.size() == logits.batch * logits.seq, "targets must have one entry per position");
  require(class_weights.empty() || class_weights.size() == C, "class weights must have one entry per class");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    const int t = targets[n];
    if (t == -1) continue;
    require(t >= 0 && static_cast<std::size_t>(t) < C, "target id outside vocabulary");
    const double* x = &logits.data[n * C];
    const double mx = *std::max_element(x, x + C);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(x[c] - mx);
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(t)];
    total += w * (mx + std::log(z) - x[t]);
    ++count;
  }
  if (count == 0) fail(ErrorKind::InvalidArgument, "cross-entropy needs at least one scored position");
  return total / static_cast<double>(count);
}

double loss_and_gradients(const TransformerModel& model, const MaskedBatch& batch,
                          const std::vector<double>& class_weights, std::vector<Tensor>* grads) {
  const auto& cfg = model.config();
  check_batch(cfg, batch);
  const std::size_t S = batch.seq, C = cfg.vocab_size;
  require(class_weights.empty() || class_weights.size() == C, "class weights must have one entry per class");
  std::size_t count = 0;
  for (int t : batch.target_ids) {
    if (t == -1) continue;
    require(t >= 0 && static_cast<std::size_t>(t) < C, "target id outside vocabulary");
    ++count;
  }
  if (count == 0) fail(ErrorKind::InvalidArgument, "cross-entropy needs at least one scored position");
  const double inv_count = 1.0 / static_cast<double>(count);

  constexpr std::size_t kGroup = 4;
  const std::size_t groups = (batch.batch + kGroup - 1) / kGroup;
  std::vector<double> group_loss(groups, 0.0);
  std::vector<std::vector<Tensor>> group_grads(grads ? groups : 0);

  parallel_for(groups, [&](std::size_t g) {
    const auto& P = model.params();
    const auto E = mat(P[0]);
    const auto bias = vec(P.back());
    std::vector<Tensor>* G = nullptr;
    if (grads) {
      group_grads[g] = zeros_like(P);
      G = &group_grads[g];
    }
    for (std::size_t b = g * kGroup; b < std::min(batch.batch, (g + 1) * kGroup); ++b) {
      const int* ids = &batch.input_ids[b * S];
      const int* tgt = &batch.target_ids[b * S];
      bool any = false;
      for (std::size_t s = 0; s < S; ++s) any |= tgt[s] != -1;
      if (!any) continue;
      SeqCache cache;
      RowMat z = forward_sequence(model, ids, &batch.attention_mask[b * S], S, cache);
      RowMat dz = RowMat::Zero(z.rows(), z.cols());
      for (std::size_t s = 0; s < S; ++s) {
        if (tgt[s] == -1) continue;
        const auto row = static_cast<Eigen::Index>(s);
        Eigen::RowVectorXd logits = z.row(row) * E.transpose() + bias;
        const double mx = logits.maxCoeff();
        Eigen::RowVectorXd p = (logits.array() - mx).exp();
        const double zsum = p.sum();
        p /= zsum;
        const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(tgt[s])];
        group_loss[g] += w * (mx + std::log(zsum) - logits(tgt[s])) * inv_count;
        if (G) {
          Eigen::RowVectorXd dlogits = p * (w * inv_count);
          dlogits(tgt[s]) -= w * inv_count;
          dz.row(row) = dlogits * E;
          mat((*G)[0]).noalias() += dlogits.transpose() * z.row(row);
          vec(G->back()) += dlogits;
        }
      }
      if (G) backward_sequence(model, ids, S, cache, std::move(dz), *G);
    }
  });

  double loss = 0.0;
  for (double l : group_loss) loss += l;
  if (grads) {
    for (const auto& gg : group_grads) {
      if (gg.empty()) continue;
      for (std::size_t i = 0; i < gg.size(); ++i) vec((*grads)[i]) += vec(gg[i]);
    }
  }
  return loss;
}

AdamOptimizer::AdamOptimizer(const std::vector<Tensor>& params, double lr) : lr_(lr) {
  for (const auto& t : params) {
    m_.emplace_back(t.data.size(), 0.0);
    v_.emplace_back(t.data.size(), 0.0);
  }
}

void AdamOptimizer::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  require(params.size() == m_.size() && grads.size() == m_.size(), "optimizer state does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

std::vector<double> layer_norm_rows(const std::vector<double>& x, std::size_t rows, std::size_t cols) {
  require(x.size() == rows * cols, "layer norm input has the wrong size");
  RowMat in = MapC(x.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Tensor g{"g", {cols}, std::vector<double>(cols, 1.0)};
  Tensor b{"b", {cols}, std::vector<double>(cols, 0.0)};
  RowMat xhat;
  Eigen::VectorXd rstd;
  RowMat y = ln_forward(in, g, b, xhat, rstd);
  return {y.data(), y.data() + y.size()};
}

namespace {
constexpr int kTransformerSchemaVersion = 1;

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}
}  // namespace

void save_transformer(const TransformerModel& model, const std::filesystem::path& manifest_path) {
  const auto& c = model.config();
  nlohmann::json j;
  j["schema_version"] = kTransformerSchemaVersion;
  j["kind"] = "mlm-transformer";
  j["config"] = {{"layers", c.layers},         {"heads", c.heads},           {"d_model", c.d_model},
                 {"d_ff", c.d_ff},             {"max_seq", c.max_seq},       {"vocab_size", c.vocab_size},
                 {"mask_fraction", c.mask_fraction}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
                 {"initial_lr", c.initial_lr}, {"init_scale", c.init_scale}, {"seed", c.seed}};
  std::vector<double> flat;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& t : model.params()) {
    index.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", flat.size()}, {"count", t.data.size()}});
    flat.insert(flat.end(), t.data.begin(), t.data.end());
  }
  const std::string blob = io::pack_f64(flat);
  const auto blob_path = blob_path_for(manifest_path);
  j["tensors"] = index;
  j["blob"] = blob_path.filename().string();
  j["blob_sha256"] = io::sha256_hex(blob);
  j["dtype"] = "float64-le";
  io::write_file(blob_path, blob);
  io::write_file(manifest_path, j.dump(1) + "\n");
}

TransformerModel load_transformer(const std::filesystem::path& manifest_path) {
  try {
    const auto j = nlohmann::json::parse(io::read_file(manifest_path));
    if (j.at("schema_version").get<int>() != kTransformerSchemaVersion)
      fail(ErrorKind::InvalidData, "unsupported transformer schema version");
    const auto& jc = j.at("config");
    TransformerConfig c;
    c.layers = jc.at("layers");
    c.heads = jc.at("heads");
    c.d_model = jc.at("d_model");
    c.d_ff = jc.at("d_ff");
    c.max_seq = jc.at("max_seq");
    c.vocab_size = jc.at("vocab_size");
    c.mask_fraction = jc.at("mask_fraction");
    c.batch_size = jc.at("batch_size");
    c.epochs = jc.at("epochs");
    c.initial_lr = jc.at("initial_lr");
    c.init_scale = jc.at("init_scale");
    c.seed = jc.at("seed");
    const auto blob_path = manifest_path.parent_path() / j.at("blob").get<std::string>();
    const std::string blob = io::read_file(blob_path);
    if (io::sha256_hex(blob) != j.at("blob_sha256").get<std::string>())
      fail(ErrorKind::InvalidData, "transformer blob checksum mismatch: " + blob_path.string());
    const auto flat = io::unpack_f64(blob);
    std::vector<Tensor> params;
    for (const auto& e : j.at("tensors")) {
      Tensor t;
      t.name = e.at("name");
      t.shape = e.at("shape").get<std::vector<std::size_t>>();
      const std::size_t off = e.at("offset"), n = e.at("count");
      if (off + n > flat.size()) fail(ErrorKind::InvalidData, "tensor " + t.name + " extends past the blob");
      t.data.assign(flat.begin() + static_cast<std::ptrdiff_t>(off), flat.begin() + static_cast<std::ptrdiff_t>(off + n));
      params.push_back(std::move(t));
    }
    return TransformerModel(c, std::move(params));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("malformed transformer manifest: ") + e.what());
  }
}

}  // namespace energetext
