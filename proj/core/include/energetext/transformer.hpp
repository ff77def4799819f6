#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace energetext {

struct TransformerConfig {
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t d_model = 128;
  std::size_t d_ff = 512;
  std::size_t max_seq = 128;
  std::size_t vocab_size = 8000;
  double mask_fraction = 0.15;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  double initial_lr = 1e-3;
  double init_scale = 0.02;  // stddev of the normal weight initialization
  std::uint64_t seed = 42;

  void validate() const;

  /// Desk-scale defaults (the values above).
  static TransformerConfig desk();
  /// Distilled BERT-base dimensions; far too large to train here.
  static TransformerConfig full_scale();
};

/// Named parameter tensor, row-major.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

/// Post-norm encoder with learned positions and an output projection tied to
/// the token embedding table (plus an output bias).
///
/// Tensor order: tok_emb [C,D], pos_emb [S,D], then per layer l
///   l.wq l.bq l.wk l.bk l.wv l.bv l.wo l.bo l.ln1_g l.ln1_b
///   l.w1 [D,F] l.b1 l.w2 [F,D] l.b2 l.ln2_g l.ln2_b
/// and finally out_bias [C]. Weight matrices map rows as x W.
class TransformerModel {
 public:
  TransformerModel() = default;
  /// Randomly initialized model (normal(0, init_scale) weights, unit gains).
  explicit TransformerModel(const TransformerConfig& config);
  TransformerModel(const TransformerConfig& config, std::vector<Tensor> params);

  const TransformerConfig& config() const { return config_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);
  std::size_t parameter_count() const;

  /// Index of a layer's first tensor; see the order above.
  static constexpr std::size_t kTensorsPerLayer = 16;
  std::size_t layer_base(std::size_t layer) const { return 2 + layer * kTensorsPerLayer; }

 private:
  TransformerConfig config_;
  std::vector<Tensor> params_;
};

/// Gradient buffers shaped like the model's parameters.
std::vector<Tensor> zeros_like(const std::vector<Tensor>& params);

/// input/target/attention mask, each batch x seq row-major. Targets are -1 at
/// positions that are not scored.
struct MaskedBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<int> input_ids;
  std::vector<int> target_ids;
  std::vector<std::uint8_t> attention_mask;  // 0 exactly at [PAD]
};

/// Pads rows with [PAD] to the longest row; targets default to -1.
MaskedBatch make_batch(const std::vector<std::vector<int>>& inputs,
                       const std::vector<std::vector<int>>& targets = {});

struct Logits {
  std::size_t batch = 0, seq = 0, classes = 0;
  std::vector<double> data;  // batch x seq x classes
  double at(std::size_t b, std::size_t s, std::size_t c) const { return data[(b * seq + s) * classes + c]; }
};

/// Attention weights captured during a forward pass:
/// weights[layer][b][head] is a seq x seq row-major matrix.
struct AttentionTrace {
  std::vector<std::vector<std::vector<std::vector<double>>>> weights;
};

Logits forward(const TransformerModel& model, const MaskedBatch& batch, AttentionTrace* trace = nullptr);

/// Final-layer hidden states, batch x seq x d_model.
std::vector<double> hidden_states(const TransformerModel& model, const MaskedBatch& batch);

/// Weighted cross-entropy: mean over scored positions of -w[t] log softmax(x)[t].
double cross_entropy_loss(const Logits& logits, const std::vector<int>& targets, const std::vector<double>& class_weights);

/// Same loss computed from the model directly, with gradients accumulated into
/// `grads` (shaped by zeros_like) when non-null. Sequences are processed in
/// fixed groups and summed in order, so the result does not depend on the
/// worker count.
double loss_and_gradients(const TransformerModel& model, const MaskedBatch& batch,
                          const std::vector<double>& class_weights, std::vector<Tensor>* grads);

/// Adaptive-moment optimizer (beta1 0.9, beta2 0.999, eps 1e-8), fixed step size.
class AdamOptimizer {
 public:
  AdamOptimizer(const std::vector<Tensor>& params, double lr);
  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Layer normalization without the affine part; exposed for testing.
std::vector<double> layer_norm_rows(const std::vector<double>& x, std::size_t rows, std::size_t cols);

/// JSON manifest plus a raw little-endian float64 blob next to it
/// (same stem, ".bin").
void save_transformer(const TransformerModel& model, const std::filesystem::path& manifest_path);
TransformerModel load_transformer(const std::filesystem::path& manifest_path);

}  // namespace energetext
