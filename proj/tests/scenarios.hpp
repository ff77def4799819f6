#pragma once

// Training setups shared by the unit tests and the acceptance runner so both
// exercise the same configurations.

#include <string>
#include <vector>

#include "energetext/bpe.hpp"
#include "energetext/mlm.hpp"
#include "energetext/synthetic.hpp"

namespace scenario {

struct Memorized {
  std::vector<std::string> sentences;
  energetext::BpeTokenizer tok;
  energetext::MlmTrainResult result;
};

/// Eight sentences, whole-word tokenizer, 2-layer/2-head/d_model 32 encoder,
/// validated on its own training set.
inline energetext::TransformerConfig memorization_config(std::size_t vocab_size, std::size_t epochs) {
  energetext::TransformerConfig c;
  c.layers = 2;
  c.heads = 2;
  c.d_model = 32;
  c.d_ff = 64;
  c.max_seq = 24;
  c.vocab_size = vocab_size;
  c.batch_size = 4;
  c.epochs = epochs;
  c.initial_lr = 3e-3;
  c.seed = 42;
  return c;
}

inline Memorized memorize(std::size_t epochs = 300) {
  Memorized m;
  m.sentences = energetext::synthetic::memorization_sentences();
  // Asking for far more tokens than exist merges every word into one token.
  m.tok = energetext::train_bpe(m.sentences, 1000);
  m.result = energetext::train_mlm(m.sentences, m.sentences, m.tok, memorization_config(m.tok.size(), epochs));
  return m;
}

}  // namespace scenario
