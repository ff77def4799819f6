#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace energetext {

/// Byte-pair tokenizer over normalized text (see normalize_text). Specials
/// occupy ids 0-4; single characters follow in byte order, then merged tokens
/// in merge order. A word's leading space belongs to its first token, so
/// decode(encode(t)) == normalize_text(t).
class BpeTokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;
  static const std::vector<std::string>& special_tokens();

  BpeTokenizer() = default;
  BpeTokenizer(std::vector<std::string> tokens, std::vector<std::pair<std::string, std::string>> merges,
               bool reached_target = true);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<int> id(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  /// False when training ran out of pairs before reaching the requested size.
  bool reached_target() const { return reached_target_; }

  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  /// Token ids of normalize_text(text), no [CLS]/[SEP].
  std::vector<int> encode(std::string_view text) const;
  /// As encode, for text that is already normalized (leading space kept).
  std::vector<int> encode_normalized(std::string_view normalized) const;
  /// Concatenated token strings; specials are skipped.
  std::string decode(const std::vector<int>& ids) const;

  bool operator==(const BpeTokenizer& o) const { return tokens_ == o.tokens_ && merges_ == o.merges_; }

 private:
  std::vector<std::string> encode_word(const std::string& word) const;

  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, int> ids_;
  std::map<std::pair<std::string, std::string>, std::size_t> merge_rank_;
  bool reached_target_ = true;
};

/// Splits normalized text into words, each word keeping its leading space.
std::vector<std::string> pretokenize(std::string_view normalized);

/// Standard merge training until vocab_size tokens; the most frequent pair
/// wins, ties broken by lexicographic (left, right) order.
BpeTokenizer train_bpe(const std::vector<std::string>& texts, std::size_t vocab_size);

std::string tokenizer_to_json(const BpeTokenizer& tok);
BpeTokenizer tokenizer_from_json(std::string_view text);
void save_tokenizer(const BpeTokenizer& tok, const std::filesystem::path& path);
BpeTokenizer load_tokenizer(const std::filesystem::path& path);

}  // namespace energetext
