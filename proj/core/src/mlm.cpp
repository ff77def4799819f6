#include "energetext/mlm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "energetext/common.hpp"
#include "energetext/corpus.hpp"
#include "energetext/io.hpp"

namespace energetext {

MaskedRow mask_tokens(const std::vector<int>& ids, double fraction, Rng& rng, std::size_t vocab_size) {
  require(fraction > 0.0 && fraction <= 1.0, "mask fraction must lie in (0, 1]");
  require(vocab_size > static_cast<std::size_t>(BpeTokenizer::kNumSpecials), "vocabulary has no ordinary tokens");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!BpeTokenizer::is_special(ids[i])) candidates.push_back(i);
  if (candidates.empty()) fail(ErrorKind::InvalidArgument, "sequence has no maskable (non-special) tokens");

  std::vector<std::size_t> selected;
  for (std::size_t i : candidates)
    if (rng.bernoulli(fraction)) selected.push_back(i);
  if (selected.empty()) selected.push_back(candidates[rng.below(candidates.size())]);

  MaskedRow row{ids, std::vector<int>(ids.size(), -1)};
  const auto ordinary = vocab_size - BpeTokenizer::kNumSpecials;
  for (std::size_t i : selected) {
    row.target_ids[i] = ids[i];
    const double u = rng.uniform();
    if (u < 0.8)
      row.input_ids[i] = BpeTokenizer::kMask;
    else if (u < 0.9)
      row.input_ids[i] = BpeTokenizer::kNumSpecials + static_cast<int>(rng.below(ordinary));
  }
  return row;
}

MaskedRow mask_tokens(const std::vector<int>& ids, double fraction, std::uint64_t seed, std::size_t vocab_size) {
  Rng rng(derive_seed(seed, "mlm:mask"));
  return mask_tokens(ids, fraction, rng, vocab_size);
}

std::vector<std::vector<int>> encode_sequences(const BpeTokenizer& tok, const std::vector<std::string>& texts,
                                               std::size_t max_seq) {
  require(max_seq >= 3, "max_seq must leave room for [CLS], [SEP] and one token");
  const std::size_t body = max_seq - 2;
  std::vector<std::vector<int>> out;
  for (const auto& t : texts) {
    const auto ids = tok.encode(t);
    for (std::size_t start = 0; start < ids.size(); start += body) {
      std::vector<int> seq{BpeTokenizer::kCls};
      const auto end = std::min(ids.size(), start + body);
      seq.insert(seq.end(), ids.begin() + static_cast<std::ptrdiff_t>(start), ids.begin() + static_cast<std::ptrdiff_t>(end));
      seq.push_back(BpeTokenizer::kSep);
      out.push_back(std::move(seq));
    }
  }
  return out;
}

std::size_t select_best_epoch(const std::vector<EpochMetrics>& metrics) {
  require(!metrics.empty(), "no epochs to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < metrics.size(); ++i)
    if (metrics[i].val_accuracy > metrics[best].val_accuracy) best = i;
  return best;
}

namespace {

int argmax_ordinary(const double* row, std::size_t classes) {
  int best = BpeTokenizer::kNumSpecials;
  for (std::size_t c = BpeTokenizer::kNumSpecials + 1; c < classes; ++c)
    if (row[c] > row[best]) best = static_cast<int>(c);
  return best;
}

}  // namespace

MlmEvaluation evaluate_masked(const TransformerModel& model, const std::vector<std::vector<int>>& sequences,
                              double fraction, std::uint64_t seed) {
  require(!sequences.empty(), "no sequences to evaluate");
  const std::size_t C = model.config().vocab_size;
  Rng rng(derive_seed(seed, "mlm:evaluate"));
  std::vector<MaskedRow> rows;
  rows.reserve(sequences.size());
  for (const auto& s : sequences) rows.push_back(mask_tokens(s, fraction, rng, C));

  const std::size_t chunk = std::max<std::size_t>(1, model.config().batch_size);
  double loss_sum = 0.0;
  std::size_t correct = 0, total = 0;
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    std::vector<std::vector<int>> in, tg;
    for (std::size_t i = start; i < std::min(rows.size(), start + chunk); ++i) {
      in.push_back(rows[i].input_ids);
      tg.push_back(rows[i].target_ids);
    }
    const auto batch = make_batch(in, tg);
    const auto logits = forward(model, batch);
    for (std::size_t n = 0; n < batch.target_ids.size(); ++n) {
      const int t = batch.target_ids[n];
      if (t == -1) continue;
      const double* x = &logits.data[n * C];
      const double mx = *std::max_element(x, x + C);
      double z = 0.0;
      for (std::size_t c = 0; c < C; ++c) z += std::exp(x[c] - mx);
      loss_sum += mx + std::log(z) - x[t];
      correct += argmax_ordinary(x, C) == t;
      ++total;
    }
  }
  return {loss_sum / static_cast<double>(total), 100.0 * static_cast<double>(correct) / static_cast<double>(total), total};
}

double masked_accuracy(const TransformerModel& model, const BpeTokenizer& tok, const std::vector<std::string>& texts,
                       double fraction, std::uint64_t seed) {
  const auto seqs = encode_sequences(tok, texts, model.config().max_seq);
  require(!seqs.empty(), "no maskable text to evaluate");
  return evaluate_masked(model, seqs, fraction, seed).accuracy;
}

MlmTrainResult train_mlm(const std::vector<std::string>& train_texts, const std::vector<std::string>& val_texts,
                         const BpeTokenizer& tok, const TransformerConfig& config,
                         const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  require(tok.size() == config.vocab_size,
          "tokenizer has " + std::to_string(tok.size()) + " tokens but the model expects " + std::to_string(config.vocab_size));
  const auto train = encode_sequences(tok, train_texts, config.max_seq);
  require(!train.empty(), "training corpus encodes to no tokens");
  // Without a held-out set the training texts double as validation.
  const auto val = val_texts.empty() ? train : encode_sequences(tok, val_texts, config.max_seq);
  require(!val.empty(), "validation corpus encodes to no tokens");

  TransformerModel model(config);
  AdamOptimizer adam(model.params(), config.initial_lr);
  Rng order_rng(derive_seed(config.seed, "mlm:shuffle"));
  Rng mask_rng(derive_seed(config.seed, "mlm:mask"));
  const std::uint64_t val_seed = derive_seed(config.seed, "mlm:validation");
  const std::vector<double> uniform_weights;

  MlmTrainResult result;
  std::vector<Tensor> best_params = model.params();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<std::vector<int>> in, tg;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        auto row = mask_tokens(train[order[i]], config.mask_fraction, mask_rng, config.vocab_size);
        in.push_back(std::move(row.input_ids));
        tg.push_back(std::move(row.target_ids));
      }
      auto grads = zeros_like(model.params());
      const double loss = loss_and_gradients(model, make_batch(in, tg), uniform_weights, &grads);
      if (!std::isfinite(loss))
        fail(ErrorKind::Numeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches + 1));
      adam.step(model.params(), grads);
      loss_sum += loss;
      ++batches;
    }
    const auto eval = evaluate_masked(model, val, config.mask_fraction, val_seed);
    if (!std::isfinite(eval.loss))
      fail(ErrorKind::Numeric, "non-finite validation loss at epoch " + std::to_string(epoch));
    EpochMetrics m{epoch, loss_sum / static_cast<double>(batches), eval.loss, eval.accuracy};
    if (result.metrics.empty() || m.val_accuracy > result.metrics[select_best_epoch(result.metrics)].val_accuracy)
      best_params = model.params();
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.best_epoch = select_best_epoch(result.metrics) + 1;
  result.model = TransformerModel(config, std::move(best_params));
  return result;
}

std::vector<std::pair<std::string, double>> predict_masked(const TransformerModel& model, const BpeTokenizer& tok,
                                                           const std::string& text, std::size_t k) {
  static const std::string kMarker = "[MASK]";
  const auto pos = text.find(kMarker);
  if (pos == std::string::npos) fail(ErrorKind::InvalidArgument, "text contains no [MASK] marker");
  if (text.find(kMarker, pos + kMarker.size()) != std::string::npos)
    fail(ErrorKind::InvalidArgument, "text contains more than one [MASK] marker");
  require(k >= 1, "k must be at least 1");

  const std::string right_raw = text.substr(pos + kMarker.size());
  std::string right = normalize_text(right_raw);
  if (!right.empty() && !right_raw.empty() && std::isspace(static_cast<unsigned char>(right_raw.front())))
    right.insert(right.begin(), ' ');

  std::vector<int> ids{BpeTokenizer::kCls};
  // The masked word owns the space before it, as every non-initial word does.
  std::string left_raw = text.substr(0, pos);
  while (!left_raw.empty() && std::isspace(static_cast<unsigned char>(left_raw.back()))) left_raw.pop_back();
  const auto left = tok.encode(left_raw);
  ids.insert(ids.end(), left.begin(), left.end());
  const std::size_t mask_at = ids.size();
  ids.push_back(BpeTokenizer::kMask);
  const auto rest = tok.encode_normalized(right);
  ids.insert(ids.end(), rest.begin(), rest.end());
  ids.push_back(BpeTokenizer::kSep);
  if (ids.size() > model.config().max_seq)
    fail(ErrorKind::InvalidArgument, "text encodes to " + std::to_string(ids.size()) + " ids, above max_seq");

  const auto logits = forward(model, make_batch({ids}));
  const std::size_t C = model.config().vocab_size;
  const double* x = &logits.data[mask_at * C];
  const double mx = *std::max_element(x, x + C);
  std::vector<double> p(C);
  double z = 0.0;
  for (std::size_t c = 0; c < C; ++c) z += (p[c] = std::exp(x[c] - mx));
  for (auto& v : p) v /= z;

  std::vector<int> order;
  for (std::size_t c = BpeTokenizer::kNumSpecials; c < C; ++c) order.push_back(static_cast<int>(c));
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](int a, int b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(tok.token(order[i]), p[order[i]]);
  return out;
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_masked_accuracy\n";
  for (const auto& m : metrics)
    out << m.epoch << ',' << io::format_double(m.train_loss) << ',' << io::format_double(m.val_loss) << ','
        << io::format_double(m.val_accuracy) << '\n';
  return out.str();
}

}  // namespace energetext
