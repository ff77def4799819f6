#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace energetext {

/// Abstract categories with stable integer codes 0-3.
enum class AbstractClass : int {
  Characterization = 0,
  Modeling = 1,
  Processing = 2,
  Synthesis = 3,
};

inline constexpr int kNumAbstractClasses = 4;

std::string_view to_string(AbstractClass c);
/// Case-insensitive name lookup.
std::optional<AbstractClass> parse_abstract_class(std::string_view name);
AbstractClass abstract_class_from_code(int code);

struct RawDocument {
  std::string id;
  std::string source;
  std::string text;
  std::optional<std::string> label;
};

struct ProcessedDocument {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<AbstractClass> label;
};

enum class CorpusFormat { Jsonl, TextDir };

/// Loads JSONL records ({"id","text",optional "label","source"}) or every
/// *.txt file of a directory (id = file stem, sorted by filename).
std::vector<RawDocument> load_corpus(const std::filesystem::path& path, CorpusFormat format);
CorpusFormat parse_corpus_format(std::string_view name);

/// Writes RawDocuments back out as JSONL.
std::string corpus_to_jsonl(const std::vector<RawDocument>& docs);

using Stoplist = std::unordered_set<std::string>;

/// The shipped English function-word list.
const Stoplist& default_stoplist();
/// One term per line; blank lines and lines starting with '#' are skipped.
Stoplist load_stoplist(const std::filesystem::path& path);

/// Variant -> canonical replacement. Canonical terms are never keys, so one
/// application is a fixpoint.
class SynonymMap {
 public:
  SynonymMap() = default;
  /// Throws if a canonical term also appears as a variant.
  explicit SynonymMap(std::map<std::string, std::string> entries);

  const std::string& apply(const std::string& term) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Two-column TSV (variant, canonical). Both columns are normalized the same
/// way document text is, so "1,3,5-..." style names match preprocessed tokens.
SynonymMap load_synonyms(const std::filesystem::path& path);
SynonymMap parse_synonyms(std::string_view tsv);
/// The shipped energetic-material alias table.
const SynonymMap& default_synonyms();

/// Lowercases ASCII, turns whitespace runs into single spaces and deletes every
/// other character outside [a-z0-9]. This is the whole of the transformer-side
/// preprocessing and the first stage of the bag-of-words pipeline.
std::string normalize_text(std::string_view text);

bool is_number_token(std::string_view token);

struct PreprocessOptions {
  bool stemming = true;
};

ProcessedDocument preprocess_document(const RawDocument& doc, const Stoplist& stoplist,
                                      const SynonymMap& synonyms,
                                      const PreprocessOptions& options = {});

/// Order-stable parallel map of preprocess_document.
std::vector<ProcessedDocument> preprocess_corpus(const std::vector<RawDocument>& docs,
                                                 const Stoplist& stoplist,
                                                 const SynonymMap& synonyms,
                                                 const PreprocessOptions& options = {});

/// Processed corpus cache: JSONL of {"id","tokens":[...],"label"}.
std::string processed_to_jsonl(const std::vector<ProcessedDocument>& docs);
std::vector<ProcessedDocument> load_processed(const std::filesystem::path& path);
std::vector<ProcessedDocument> parse_processed_jsonl(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Terms in index order; counts parallel to terms.
  Vocabulary(std::vector<std::string> terms, std::vector<std::uint64_t> counts, std::uint64_t min_count);

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  std::optional<std::size_t> index(std::string_view term) const;
  bool contains(std::string_view term) const { return index(term).has_value(); }
  const std::string& term(std::size_t i) const { return terms_.at(i); }
  std::uint64_t count(std::size_t i) const { return counts_.at(i); }
  std::uint64_t min_count() const { return min_count_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  /// Hex SHA-256 over the newline-joined term list.
  std::string hash() const;

  /// Maps tokens to indices, dropping out-of-vocabulary tokens.
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  bool operator==(const Vocabulary& other) const {
    return terms_ == other.terms_ && counts_ == other.counts_ && min_count_ == other.min_count_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t min_count_ = 1;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Terms with corpus frequency >= min_count, by descending frequency then
/// lexicographic order.
Vocabulary build_vocabulary(const std::vector<ProcessedDocument>& docs, std::uint64_t min_count);

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::uint64_t seed = 0;
  double fraction = 0.0;
};

/// Seeded permutation cut at round(fraction * N); both sides keep at least one
/// document.
template <typename Doc>
CorpusSplit split_corpus(const std::vector<Doc>& docs, double fraction, std::uint64_t seed);

CorpusSplit split_ids(const std::vector<std::string>& ids, double fraction, std::uint64_t seed);

template <typename Doc>
CorpusSplit split_corpus(const std::vector<Doc>& docs, double fraction, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.push_back(d.id);
  return split_ids(ids, fraction, seed);
}

/// Selects the documents whose ids are in `ids`, preserving corpus order.
template <typename Doc>
std::vector<Doc> select_documents(const std::vector<Doc>& docs, const std::vector<std::string>& ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  std::vector<Doc> out;
  for (const auto& d : docs)
    if (wanted.count(d.id)) out.push_back(d);
  return out;
}

}  // namespace energetext
