#include "energetext/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>

#include "energetext/common.hpp"
#include "energetext/io.hpp"
#include "energetext/rng.hpp"
#include "energetext/stemmer.hpp"

namespace energetext {

namespace detail {
extern const char* const kDefaultStoplist;
extern const char* const kDefaultSynonyms;
}

using nlohmann::json;

std::string_view to_string(AbstractClass c) {
  switch (c) {
    case AbstractClass::Characterization:
      return "Characterization";
    case AbstractClass::Modeling:
      return "Modeling";
    case AbstractClass::Processing:
      return "Processing";
    case AbstractClass::Synthesis:
      return "Synthesis";
  }
  return "?";
}

std::optional<AbstractClass> parse_abstract_class(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (int code = 0; code < kNumAbstractClasses; ++code) {
    const auto cls = static_cast<AbstractClass>(code);
    std::string candidate;
    for (char c : to_string(cls)) candidate.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (candidate == lower) return cls;
  }
  return std::nullopt;
}

AbstractClass abstract_class_from_code(int code) {
  require(code >= 0 && code < kNumAbstractClasses, "abstract class code out of range: " + std::to_string(code));
  return static_cast<AbstractClass>(code);
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "text-dir") return CorpusFormat::TextDir;
  fail(ErrorKind::InvalidArgument, "unknown corpus format: " + std::string(name));
}

namespace {

std::vector<RawDocument> parse_jsonl_corpus(std::string_view text) {
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> seen;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1);
    if (io::trim(lines[i]).empty()) continue;
    json rec;
    try {
      rec = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::InvalidData, "malformed JSON on " + where + ": " + e.what());
    }
    if (!rec.is_object()) fail(ErrorKind::InvalidData, "record on " + where + " is not an object");
    if (!rec.contains("id") || !rec["id"].is_string())
      fail(ErrorKind::InvalidData, "record on " + where + " has no string \"id\"");
    if (!rec.contains("text") || !rec["text"].is_string())
      fail(ErrorKind::InvalidData, "record on " + where + " has no string \"text\"");
    RawDocument doc;
    doc.id = rec["id"].get<std::string>();
    doc.text = rec["text"].get<std::string>();
    if (rec.contains("source") && rec["source"].is_string()) doc.source = rec["source"].get<std::string>();
    if (rec.contains("label") && !rec["label"].is_null()) {
      if (!rec["label"].is_string()) fail(ErrorKind::InvalidData, "non-string label on " + where);
      doc.label = rec["label"].get<std::string>();
    }
    if (doc.id.empty()) fail(ErrorKind::InvalidData, "empty id on " + where);
    if (io::trim(doc.text).empty()) fail(ErrorKind::InvalidData, "empty text on " + where);
    if (!seen.insert(doc.id).second) fail(ErrorKind::InvalidData, "duplicate document id: " + doc.id);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<RawDocument> load_text_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<RawDocument> docs;
  for (const auto& f : files) {
    RawDocument doc;
    doc.id = f.stem().string();
    doc.source = f.filename().string();
    doc.text = io::read_file(f);
    if (io::trim(doc.text).empty()) fail(ErrorKind::InvalidData, "empty text in " + f.string());
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace

std::vector<RawDocument> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingInput, "corpus not found: " + path.string());
  std::vector<RawDocument> docs;
  if (format == CorpusFormat::Jsonl) {
    docs = parse_jsonl_corpus(io::read_file(path));
  } else {
    if (!std::filesystem::is_directory(path))
      fail(ErrorKind::InvalidArgument, "text-dir corpus is not a directory: " + path.string());
    docs = load_text_dir(path);
  }
  if (docs.empty()) fail(ErrorKind::InvalidData, "empty corpus: " + path.string());
  return docs;
}

std::string corpus_to_jsonl(const std::vector<RawDocument>& docs) {
  std::string out;
  for (const auto& d : docs) {
    json rec = {{"id", d.id}, {"text", d.text}};
    if (!d.source.empty()) rec["source"] = d.source;
    if (d.label) rec["label"] = *d.label;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

namespace {

Stoplist parse_stoplist(std::string_view text) {
  Stoplist out;
  for (const auto& line : io::split_lines(text)) {
    auto t = io::trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.insert(normalize_text(t));
  }
  return out;
}

}  // namespace

const Stoplist& default_stoplist() {
  static const Stoplist list = parse_stoplist(detail::kDefaultStoplist);
  return list;
}

Stoplist load_stoplist(const std::filesystem::path& path) { return parse_stoplist(io::read_file(path)); }

SynonymMap::SynonymMap(std::map<std::string, std::string> entries) : entries_(std::move(entries)) {
  for (const auto& [variant, canonical] : entries_) {
    require(!variant.empty() && !canonical.empty(), "synonym entries must be nonempty");
    if (entries_.count(canonical))
      fail(ErrorKind::InvalidData, "synonym canonical term is also a variant: " + canonical);
  }
}

const std::string& SynonymMap::apply(const std::string& term) const {
  auto it = entries_.find(term);
  return it == entries_.end() ? term : it->second;
}

SynonymMap parse_synonyms(std::string_view tsv) {
  std::map<std::string, std::string> entries;
  const auto lines = io::split_lines(tsv);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto t = io::trim(lines[i]);
    if (t.empty() || t.front() == '#') continue;
    const auto tab = t.find('\t');
    if (tab == std::string_view::npos)
      fail(ErrorKind::InvalidData, "synonym line " + std::to_string(i + 1) + " has no tab");
    // Multi-word names collapse to a single token.
    auto squash = [](std::string_view s) {
      std::string n = normalize_text(s);
      n.erase(std::remove(n.begin(), n.end(), ' '), n.end());
      return n;
    };
    std::string variant = squash(t.substr(0, tab));
    std::string canonical = squash(t.substr(tab + 1));
    if (variant.empty() || canonical.empty())
      fail(ErrorKind::InvalidData, "synonym line " + std::to_string(i + 1) + " has an empty column");
    if (variant == canonical) continue;
    auto [it, inserted] = entries.emplace(variant, canonical);
    if (!inserted && it->second != canonical)
      fail(ErrorKind::InvalidData, "conflicting synonyms for " + variant);
  }
  return SynonymMap(std::move(entries));
}

SynonymMap load_synonyms(const std::filesystem::path& path) { return parse_synonyms(io::read_file(path)); }

const SynonymMap& default_synonyms() {
  static const SynonymMap map = parse_synonyms(detail::kDefaultSynonyms);
  return map;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    char lc = static_cast<char>(std::tolower(c));
    if ((lc >= 'a' && lc <= 'z') || (lc >= '0' && lc <= '9')) {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(lc);
    }
  }
  return out;
}

bool is_number_token(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; });
}

ProcessedDocument preprocess_document(const RawDocument& doc, const Stoplist& stoplist,
                                      const SynonymMap& synonyms, const PreprocessOptions& options) {
  ProcessedDocument out;
  out.id = doc.id;
  if (doc.label) {
    auto cls = parse_abstract_class(*doc.label);
    if (!cls) fail(ErrorKind::InvalidData, "unknown label \"" + *doc.label + "\" on document " + doc.id);
    out.label = cls;
  }
  const std::string normalized = normalize_text(doc.text);
  const auto droppable = [&](const std::string& t) {
    return t.empty() || is_number_token(t) || stoplist.count(t) > 0;
  };

  std::size_t start = 0;
  while (start < normalized.size()) {
    std::size_t end = normalized.find(' ', start);
    if (end == std::string::npos) end = normalized.size();
    std::string token = normalized.substr(start, end - start);
    start = end + 1;
    if (droppable(token)) continue;
    // Synonyms and stemming can feed each other; settle on a fixpoint so a
    // second pass over the output changes nothing.
    for (int round = 0; round < 8; ++round) {
      std::string next = synonyms.apply(token);
      if (options.stemming) next = stem(next);
      if (next == token) break;
      token = std::move(next);
    }
    if (droppable(token)) continue;
    out.tokens.push_back(std::move(token));
  }
  return out;
}

std::vector<ProcessedDocument> preprocess_corpus(const std::vector<RawDocument>& docs, const Stoplist& stoplist,
                                                 const SynonymMap& synonyms, const PreprocessOptions& options) {
  std::vector<ProcessedDocument> out(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) { out[i] = preprocess_document(docs[i], stoplist, synonyms, options); });
  return out;
}

std::string processed_to_jsonl(const std::vector<ProcessedDocument>& docs) {
  std::string out;
  for (const auto& d : docs) {
    json rec = {{"id", d.id}, {"tokens", d.tokens}};
    rec["label"] = d.label ? json(std::string(to_string(*d.label))) : json(nullptr);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<ProcessedDocument> parse_processed_jsonl(std::string_view text) {
  std::vector<ProcessedDocument> docs;
  std::unordered_set<std::string> seen;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const std::string where = "line " + std::to_string(i + 1);
    try {
      json rec = json::parse(lines[i]);
      ProcessedDocument doc;
      doc.id = rec.at("id").get<std::string>();
      doc.tokens = rec.at("tokens").get<std::vector<std::string>>();
      if (rec.contains("label") && !rec["label"].is_null()) {
        auto cls = parse_abstract_class(rec["label"].get<std::string>());
        if (!cls) fail(ErrorKind::InvalidData, "unknown label on " + where);
        doc.label = cls;
      }
      if (!seen.insert(doc.id).second) fail(ErrorKind::InvalidData, "duplicate document id: " + doc.id);
      docs.push_back(std::move(doc));
    } catch (const json::exception& e) {
      fail(ErrorKind::InvalidData, "malformed processed record on " + where + ": " + e.what());
    }
  }
  if (docs.empty()) fail(ErrorKind::InvalidData, "empty processed corpus");
  return docs;
}

std::vector<ProcessedDocument> load_processed(const std::filesystem::path& path) {
  return parse_processed_jsonl(io::read_file(path));
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::uint64_t> counts, std::uint64_t min_count)
    : terms_(std::move(terms)), counts_(std::move(counts)), min_count_(min_count) {
  require(terms_.size() == counts_.size(), "vocabulary terms and counts differ in length");
  lookup_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!lookup_.emplace(terms_[i], i).second) fail(ErrorKind::InvalidData, "duplicate vocabulary term: " + terms_[i]);
  }
}

std::optional<std::size_t> Vocabulary::index(std::string_view term) const {
  auto it = lookup_.find(std::string(term));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::hash() const {
  std::string joined;
  for (const auto& t : terms_) {
    joined += t;
    joined += '\n';
  }
  return io::sha256_hex(joined);
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (auto i = index(t)) out.push_back(*i);
  return out;
}

Vocabulary build_vocabulary(const std::vector<ProcessedDocument>& docs, std::uint64_t min_count) {
  require(!docs.empty(), "cannot build a vocabulary from zero documents");
  require(min_count >= 1, "min_count must be at least 1");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& d : docs)
    for (const auto& t : d.tokens) ++counts[t];

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [term, n] : counts)
    if (n >= min_count) kept.emplace_back(term, n);
  if (kept.empty()) fail(ErrorKind::InvalidData, "empty vocabulary");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> terms;
  std::vector<std::uint64_t> freq;
  for (auto& [term, n] : kept) {
    terms.push_back(term);
    freq.push_back(n);
  }
  return Vocabulary(std::move(terms), std::move(freq), min_count);
}

CorpusSplit split_ids(const std::vector<std::string>& ids, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, "split fraction must lie in (0, 1)");
  require(ids.size() >= 2, "split needs at least 2 documents");
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "corpus:split"));
  rng.shuffle(order);

  const auto n = static_cast<long long>(ids.size());
  long long cut = std::llround(fraction * static_cast<double>(n));
  cut = std::clamp(cut, 1LL, n - 1);

  CorpusSplit split;
  split.seed = seed;
  split.fraction = fraction;
  for (long long i = 0; i < n; ++i) {
    auto& side = i < cut ? split.train : split.validation;
    side.push_back(ids[order[static_cast<std::size_t>(i)]]);
  }
  return split;
}

}  // namespace energetext
