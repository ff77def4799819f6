#include "energetext/bpe.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

#include "energetext/common.hpp"
#include "energetext/corpus.hpp"
#include "energetext/io.hpp"

namespace energetext {

using nlohmann::json;

const std::vector<std::string>& BpeTokenizer::special_tokens() {
  static const std::vector<std::string> specials{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return specials;
}

BpeTokenizer::BpeTokenizer(std::vector<std::string> tokens, std::vector<std::pair<std::string, std::string>> merges,
                           bool reached_target)
    : tokens_(std::move(tokens)), merges_(std::move(merges)), reached_target_(reached_target) {
  const auto& specials = special_tokens();
  require(tokens_.size() >= specials.size(), "tokenizer is missing its special tokens");
  for (std::size_t i = 0; i < specials.size(); ++i)
    if (tokens_[i] != specials[i]) fail(ErrorKind::InvalidData, "special token " + specials[i] + " out of place");
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second)
      fail(ErrorKind::InvalidData, "duplicate token in tokenizer: " + tokens_[i]);
  for (std::size_t r = 0; r < merges_.size(); ++r) merge_rank_.emplace(merges_[r], r);
}

std::optional<int> BpeTokenizer::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> pretokenize(std::string_view normalized) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < normalized.size()) {
    std::size_t j = i;
    if (normalized[j] == ' ') ++j;
    while (j < normalized.size() && normalized[j] != ' ') ++j;
    words.emplace_back(normalized.substr(i, j - i));
    i = j;
  }
  return words;
}

std::vector<std::string> BpeTokenizer::encode_word(const std::string& word) const {
  std::vector<std::string> symbols;
  for (char c : word) symbols.emplace_back(1, c);
  while (symbols.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
      if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == merges_.size()) break;
    const auto& [left, right] = merges_[best_rank];
    std::vector<std::string> next;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        next.push_back(left + right);
        ++i;
      } else {
        next.push_back(std::move(symbols[i]));
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

std::vector<int> BpeTokenizer::encode(std::string_view text) const { return encode_normalized(normalize_text(text)); }

std::vector<int> BpeTokenizer::encode_normalized(std::string_view normalized) const {
  std::vector<int> ids;
  for (const auto& word : pretokenize(normalized)) {
    for (const auto& sym : encode_word(word)) {
      auto it = ids_.find(sym);
      ids.push_back(it == ids_.end() ? kUnk : it->second);
    }
  }
  return ids;
}

std::string BpeTokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (is_special(i) || i < 0 || static_cast<std::size_t>(i) >= tokens_.size()) continue;
    out += tokens_[static_cast<std::size_t>(i)];
  }
  return out;
}

BpeTokenizer train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size) {
  std::map<std::string, std::uint64_t> word_counts;
  std::set<char> alphabet;
  for (const auto& t : texts)
    for (auto& w : pretokenize(normalize_text(t))) {
      for (char c : w) alphabet.insert(c);
      ++word_counts[w];
    }
  require(!word_counts.empty(), "cannot train a tokenizer on an empty corpus");
  require(vocab_size > BpeTokenizer::kNumSpecials + alphabet.size(),
          "vocabulary size must exceed specials plus the " + std::to_string(alphabet.size()) + " distinct characters");

  std::vector<std::string> tokens = BpeTokenizer::special_tokens();
  std::set<std::string> known(tokens.begin(), tokens.end());
  for (char c : alphabet) {
    tokens.emplace_back(1, c);
    known.insert(tokens.back());
  }

  struct Word {
    std::vector<std::string> symbols;
    std::uint64_t count;
  };
  std::vector<Word> words;
  for (const auto& [w, n] : word_counts) {
    Word word{{}, n};
    for (char c : w) word.symbols.emplace_back(1, c);
    words.push_back(std::move(word));
  }

  std::vector<std::pair<std::string, std::string>> merges;
  bool reached = true;
  while (tokens.size() < vocab_size) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) pair_counts[{w.symbols[i], w.symbols[i + 1]}] += w.count;
    if (pair_counts.empty()) {
      reached = false;
      break;
    }
    // std::map iterates in lexicographic pair order, so the first maximum wins ties.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [left, right] = best->first;
    merges.emplace_back(left, right);
    const std::string merged = left + right;
    if (known.insert(merged).second) tokens.push_back(merged);

    for (auto& w : words) {
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(std::move(w.symbols[i]));
        }
      }
      w.symbols = std::move(next);
    }
  }
  return BpeTokenizer(std::move(tokens), std::move(merges), reached);
}

namespace {
constexpr int kTokenizerSchemaVersion = 1;
}

std::string tokenizer_to_json(const BpeTokenizer& tok) {
  json j;
  j["schema_version"] = kTokenizerSchemaVersion;
  j["specials"] = BpeTokenizer::special_tokens();
  j["vocab"] = tok.tokens();
  json merges = json::array();
  for (const auto& [l, r] : tok.merges()) merges.push_back({l, r});
  j["merges"] = merges;
  j["reached_target"] = tok.reached_target();
  return j.dump(1) + "\n";
}

BpeTokenizer tokenizer_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != kTokenizerSchemaVersion)
      fail(ErrorKind::InvalidData, "unsupported tokenizer schema version");
    if (j.at("specials").get<std::vector<std::string>>() != BpeTokenizer::special_tokens())
      fail(ErrorKind::InvalidData, "tokenizer special tokens differ from the expected set");
    std::vector<std::pair<std::string, std::string>> merges;
    for (const auto& m : j.at("merges")) merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
    return BpeTokenizer(j.at("vocab").get<std::vector<std::string>>(), std::move(merges),
                        j.value("reached_target", true));
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("malformed tokenizer: ") + e.what());
  }
}

void save_tokenizer(const BpeTokenizer& tok, const std::filesystem::path& path) {
  io::write_file(path, tokenizer_to_json(tok));
}

BpeTokenizer load_tokenizer(const std::filesystem::path& path) { return tokenizer_from_json(io::read_file(path)); }

}  // namespace energetext
