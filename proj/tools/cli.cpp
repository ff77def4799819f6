#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "energetext/bpe.hpp"
#include "energetext/classify.hpp"
#include "energetext/common.hpp"
#include "energetext/corpus.hpp"
#include "energetext/embeddings.hpp"
#include "energetext/io.hpp"
#include "energetext/mlm.hpp"
#include "energetext/projection.hpp"
#include "energetext/synthetic.hpp"
#include "energetext/topic_model.hpp"
#include "energetext/transformer.hpp"

namespace energetext::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Kind { Count, Real, RealOrAuto, Text, Flag, Choice };

struct Param {
  std::string key;
  Kind kind;
  std::string fallback;
  std::string help;
  std::vector<std::string> choices = {};
};

class Run;

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> inputs;  // positional names; a trailing '?' marks optional
  std::vector<Param> params;
  std::function<void(Run&)> body;
};

const std::vector<Command>& commands();

const Command* find_command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return &c;
  return nullptr;
}

std::optional<std::string> check_value(const Param& p, const std::string& v) {
  auto bad = [&](const std::string& what) {
    return std::optional<std::string>("invalid value for --" + p.key + ": '" + v + "' (expected " + what + ")");
  };
  switch (p.kind) {
    case Kind::Count: {
      if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; }) || v.size() > 18)
        return bad("a non-negative integer");
      return std::nullopt;
    }
    case Kind::RealOrAuto:
      if (v == "auto") return std::nullopt;
      [[fallthrough]];
    case Kind::Real: {
      try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) return bad("a number");
      } catch (const std::exception&) {
        return bad(p.kind == Kind::Real ? "a number" : "a number or 'auto'");
      }
      return std::nullopt;
    }
    case Kind::Flag:
      if (v == "true" || v == "false" || v == "1" || v == "0" || v == "yes" || v == "no") return std::nullopt;
      return bad("true or false");
    case Kind::Choice:
      if (std::find(p.choices.begin(), p.choices.end(), v) != p.choices.end()) return std::nullopt;
      {
        std::string list;
        for (const auto& c : p.choices) list += (list.empty() ? "" : "|") + c;
        return bad(list);
      }
    case Kind::Text:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::string> check_seed(const std::string& v) {
  if (v.empty() || v.size() > 20 || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return "invalid value for --seed: '" + v + "' (expected a non-negative integer)";
  try {
    (void)std::stoull(v);
  } catch (const std::exception&) {
    return "invalid value for --seed: '" + v + "' (out of range)";
  }
  return std::nullopt;
}

std::string usage_text() {
  std::ostringstream out;
  out << "usage: energetext <command> [options] <inputs...>\n\ncommands:\n";
  for (const auto& c : commands()) {
    out << "  " << c.name;
    for (const auto& i : c.inputs) out << (i.back() == '?' ? " [" + i.substr(0, i.size() - 1) + "]" : " <" + i + ">");
    out << "\n      " << c.help << '\n';
  }
  out << "\nevery command accepts --out DIR, --config FILE (key=value lines) and --seed N (default 42).\n"
         "run 'energetext <command> --help' for its parameters.\n";
  return out.str();
}

std::size_t required_inputs(const Command& c) {
  return static_cast<std::size_t>(std::count_if(c.inputs.begin(), c.inputs.end(), [](const std::string& s) { return s.back() != '?'; }));
}

}  // namespace

const std::string& RunConfig::text(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) fail(ErrorKind::InvalidArgument, "command " + command + " has no parameter " + key);
  return it->second;
}

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(std::stoull(text(key))); }

double RunConfig::real(const std::string& key) const { return std::stod(text(key)); }

bool RunConfig::flag(const std::string& key) const {
  const auto& v = text(key);
  return v == "true" || v == "1" || v == "yes";
}

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& c : commands()) out.push_back(c.name);
  return out;
}

ParseResult parse_invocation(const std::vector<std::string>& args) {
  if (args.empty()) return {kUsage, std::nullopt, usage_text()};
  if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") return {kOk, std::nullopt, usage_text()};
  const Command* cmd = find_command(args[0]);
  if (!cmd) return {kUsage, std::nullopt, "unknown command '" + args[0] + "'\n\n" + usage_text()};

  CLI::App app(cmd->help, "energetext " + cmd->name);
  std::string out_dir = "runs/" + cmd->name, config_path, seed = "42";
  std::vector<std::string> inputs;
  app.add_option("--out", out_dir, "output directory");
  auto* config_opt = app.add_option("--config", config_path, "key=value parameter file");
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_opts;
  for (const auto& p : cmd->params) {
    std::string help = p.help + " (default " + (p.fallback.empty() ? "none" : p.fallback) + ")";
    flag_opts[p.key] = app.add_option("--" + p.key, flag_values[p.key], help);
  }
  if (!cmd->inputs.empty()) {
    std::string names;
    for (const auto& i : cmd->inputs) names += (names.empty() ? "" : " ") + i;
    app.add_option("inputs", inputs, names)->expected(static_cast<int>(required_inputs(*cmd)), static_cast<int>(cmd->inputs.size()));
  }

  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);  // CLI11 consumes a reversed vector
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    return {kOk, std::nullopt, app.help()};
  } catch (const CLI::ParseError& e) {
    return {kUsage, std::nullopt, std::string(e.what()) + "\n\n" + app.help()};
  }
  if (inputs.size() < required_inputs(*cmd))
    return {kUsage, std::nullopt, "missing input arguments\n\n" + app.help()};

  RunConfig rc;
  rc.command = cmd->name;
  rc.out_dir = out_dir;
  for (const auto& i : inputs) rc.inputs.emplace_back(i);
  for (const auto& p : cmd->params) rc.params[p.key] = p.fallback;

  std::string seed_value = "42";
  if (config_opt->count()) {
    rc.config_file = config_path;
    std::string text;
    try {
      text = io::read_file(config_path);
    } catch (const Error& e) {
      return {kMissingInput, std::nullopt, e.what()};
    }
    const auto lines = io::split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      const auto line = io::trim(lines[n]);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        return {kUsage, std::nullopt, config_path + ":" + std::to_string(n + 1) + ": expected key=value"};
      const std::string key(io::trim(line.substr(0, eq)));
      const std::string value(io::trim(line.substr(eq + 1)));
      if (key == "seed") {
        seed_value = value;
        continue;
      }
      if (!rc.params.count(key))
        return {kUsage, std::nullopt, config_path + ":" + std::to_string(n + 1) + ": unknown key '" + key + "' for " + cmd->name};
      rc.params[key] = value;
    }
  }
  if (seed_opt->count()) seed_value = seed;
  for (const auto& [key, opt] : flag_opts)
    if (opt->count()) rc.params[key] = flag_values[key];

  if (auto err = check_seed(seed_value)) return {kUsage, std::nullopt, *err};
  rc.seed = std::stoull(seed_value);
  for (const auto& p : cmd->params)
    if (auto err = check_value(p, rc.params[p.key])) return {kUsage, std::nullopt, *err};
  return {kOk, rc, ""};
}

namespace {

std::string input_digest(const fs::path& p) {
  if (!fs::is_directory(p)) return io::sha256_file(p);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += fs::relative(f, p).generic_string() + "\t" + io::sha256_file(f) + "\n";
  return io::sha256_hex(acc);
}

class Run {
 public:
  Run(const RunConfig& rc, std::ostream& log) : rc(rc), log(log) {}

  const RunConfig& rc;
  std::ostream& log;

  const fs::path& input(std::size_t i) const {
    if (i >= rc.inputs.size()) fail(ErrorKind::InvalidArgument, rc.command + " needs input #" + std::to_string(i + 1));
    return rc.inputs[i];
  }
  bool has_input(std::size_t i) const { return i < rc.inputs.size(); }

  void use(const fs::path& p) {
    if (!fs::exists(p)) fail(ErrorKind::MissingInput, "input not found: " + p.string());
    inputs_.emplace_back(p.string(), input_digest(p));
  }

  fs::path output(const std::string& name) {
    const auto p = rc.out_dir / name;
    outputs_.push_back(p);
    return p;
  }

  void write(const std::string& name, std::string_view contents) { io::write_file(output(name), contents); }

  void note(const std::string& key, json value) { summary_[key] = std::move(value); }

  void finish(double seconds) const {
    std::ostringstream cfg;
    cfg << "seed=" << rc.seed << '\n';
    for (const auto& [k, v] : rc.params) cfg << k << '=' << v << '\n';
    io::write_file(rc.out_dir / "config.txt", cfg.str());

    json m;
    m["schema_version"] = 1;
    m["command"] = rc.command;
    m["seed"] = rc.seed;
    json params = json::object();
    for (const auto& [k, v] : rc.params) params[k] = v;
    m["config"] = params;
    if (rc.config_file) m["config_file"] = rc.config_file->string();
    json ins = json::array();
    for (const auto& [path, digest] : inputs_) ins.push_back({{"path", path}, {"sha256", digest}});
    m["inputs"] = ins;
    json outs = json::array();
    for (const auto& p : outputs_)
      if (fs::exists(p)) outs.push_back({{"path", p.string()}, {"sha256", io::sha256_file(p)}});
    m["outputs"] = outs;
    m["summary"] = summary_;
    m["threads"] = worker_count();
    m["wall_time_seconds"] = seconds;
    io::write_file(rc.out_dir / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<fs::path> outputs_;
  json summary_ = json::object();
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!io::trim(cur).empty()) out.emplace_back(io::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!io::trim(cur).empty()) out.emplace_back(io::trim(cur));
  return out;
}

std::vector<RawDocument> load_raw(Run& r, const fs::path& p, const std::string& format) {
  r.use(p);
  CorpusFormat f = CorpusFormat::Jsonl;
  if (format == "auto")
    f = fs::is_directory(p) ? CorpusFormat::TextDir : CorpusFormat::Jsonl;
  else
    f = parse_corpus_format(format);
  return load_corpus(p, f);
}

std::vector<ProcessedDocument> load_proc(Run& r, const fs::path& p) {
  r.use(p);
  return load_processed(p);
}

std::vector<std::string> texts_of(const std::vector<RawDocument>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.text);
  return out;
}

void cmd_preprocess(Run& r) {
  const auto docs = load_raw(r, r.input(0), r.rc.text("format"));
  Stoplist stop = default_stoplist();
  if (!r.rc.text("stoplist").empty()) {
    r.use(r.rc.text("stoplist"));
    stop = load_stoplist(r.rc.text("stoplist"));
  }
  SynonymMap syn = default_synonyms();
  if (!r.rc.text("synonyms").empty()) {
    r.use(r.rc.text("synonyms"));
    syn = load_synonyms(r.rc.text("synonyms"));
  }
  PreprocessOptions opt;
  opt.stemming = r.rc.flag("stemming");
  const auto processed = preprocess_corpus(docs, stop, syn, opt);
  r.write("processed.jsonl", processed_to_jsonl(processed));
  std::size_t tokens = 0;
  for (const auto& d : processed) tokens += d.tokens.size();
  r.note("documents", processed.size());
  r.note("tokens", tokens);
  r.log << "preprocessed " << processed.size() << " documents, " << tokens << " tokens\n";
}

void cmd_split(Run& r) {
  r.use(r.input(0));
  const auto lines = io::split_lines(io::read_file(r.input(0)));
  std::vector<std::string> ids, kept;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      ids.push_back(json::parse(lines[i]).at("id").get<std::string>());
    } catch (const json::exception& e) {
      fail(ErrorKind::InvalidData, r.input(0).string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    kept.push_back(lines[i]);
  }
  const auto split = split_ids(ids, r.rc.real("fraction"), r.rc.seed);
  const std::set<std::string> train(split.train.begin(), split.train.end());
  std::string tr, va, sides = "id,side\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const bool is_train = train.count(ids[i]) > 0;
    (is_train ? tr : va) += kept[i] + "\n";
    sides += io::csv_escape(ids[i]) + (is_train ? ",train\n" : ",validation\n");
  }
  r.write("train.jsonl", tr);
  r.write("validation.jsonl", va);
  r.write("split.csv", sides);
  r.note("train", split.train.size());
  r.note("validation", split.validation.size());
  r.log << "split " << ids.size() << " documents: " << split.train.size() << " train, " << split.validation.size()
        << " validation\n";
}

void cmd_lda_train(Run& r) {
  const auto docs = load_proc(r, r.input(0));
  LdaConfig c;
  c.num_topics = r.rc.count("topics");
  c.alpha = r.rc.real("alpha");
  c.beta = r.rc.text("beta") == "auto" ? 1.0 / static_cast<double>(c.num_topics) : r.rc.real("beta");
  c.iterations = r.rc.count("iterations");
  c.burn_in = r.rc.count("burn-in");
  c.seed = derive_seed(r.rc.seed, "cli:lda");
  const auto vocab = build_vocabulary(docs, r.rc.count("min-count"));
  r.log << "lda: " << docs.size() << " documents, vocabulary " << vocab.size() << ", K=" << c.num_topics << '\n';
  const auto model = fit_lda(docs, vocab, c);
  save_lda(model, r.output("lda.json"));
  r.write("topics.csv", topic_report_csv(model, r.rc.count("top")));
  r.note("vocabulary", vocab.size());
}

void cmd_lda_topics(Run& r) {
  r.use(r.input(0));
  const auto model = load_lda(r.input(0));
  r.write("topics.csv", topic_report_csv(model, r.rc.count("top")));
}

void cmd_lda_infer(Run& r) {
  r.use(r.input(0));
  const auto model = load_lda(r.input(0));
  const auto docs = load_proc(r, r.input(1));
  const double threshold = r.rc.real("threshold");
  std::ostringstream out;
  out << "id,topic,probability\n";
  std::size_t skipped = 0;
  for (const auto& d : docs) {
    if (model.vocab().encode(d.tokens).empty()) {
      ++skipped;
      continue;
    }
    const auto theta = infer_doc_topics(model, d, r.rc.count("iterations"), derive_seed(r.rc.seed, d.id));
    for (const auto& [k, p] : assigned_topics(theta, threshold))
      out << io::csv_escape(d.id) << ',' << k << ',' << io::format_double(p) << '\n';
  }
  r.write("doc_topics.csv", out.str());
  r.note("skipped_documents", skipped);
  if (skipped) r.log << "skipped " << skipped << " documents with no in-vocabulary tokens\n";
}

void cmd_lda_perplexity(Run& r) {
  r.use(r.input(0));
  const auto model = load_lda(r.input(0));
  const auto docs = load_proc(r, r.input(1));
  const auto res = lda_perplexity(model, docs, r.rc.count("iterations"), r.rc.seed);
  std::ostringstream out;
  out << "perplexity,log_likelihood,scored_tokens,skipped_tokens,scored_documents,skipped_documents\n"
      << io::format_double(res.perplexity) << ',' << io::format_double(res.log_likelihood) << ',' << res.scored_tokens
      << ',' << res.skipped_tokens << ',' << res.scored_documents << ',' << res.skipped_documents << '\n';
  r.write("perplexity.csv", out.str());
  r.note("perplexity", res.perplexity);
  r.log << "perplexity " << res.perplexity << " over " << res.scored_tokens << " tokens\n";
}

void cmd_w2v_train(Run& r) {
  const auto docs = load_proc(r, r.input(0));
  W2vConfig c;
  c.dim = r.rc.count("dim");
  c.window = r.rc.count("window");
  c.min_count = r.rc.count("min-count");
  c.variant = parse_w2v_variant(r.rc.text("variant"));
  c.negatives = r.rc.count("negatives");
  c.epochs = r.rc.count("epochs");
  c.initial_lr = r.rc.real("lr");
  c.workers = r.rc.count("workers");
  c.seed = derive_seed(r.rc.seed, "cli:w2v");
  const auto vocab = build_vocabulary(docs, c.min_count);
  r.log << "w2v: vocabulary " << vocab.size() << ", d=" << c.dim << ", " << to_string(c.variant) << '\n';
  W2vTrainLog tlog;
  const auto emb = train_w2v(docs, vocab, c, &tlog);
  const auto path = r.output("embeddings.txt");
  r.output(output_sidecar(path).filename().string());
  save_embeddings(emb, path);
  std::ostringstream loss;
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < tlog.epoch_loss.size(); ++e) {
    loss << e + 1 << ',' << io::format_double(tlog.epoch_loss[e]) << '\n';
    r.log << "epoch " << e + 1 << " loss " << tlog.epoch_loss[e] << '\n';
  }
  r.write("loss.csv", loss.str());
  r.note("vocabulary", vocab.size());
}

void cmd_w2v_neighbors(Run& r) {
  r.use(r.input(0));
  const auto emb = load_embeddings(r.input(0));
  const auto terms = split_list(r.rc.text("terms"));
  require(!terms.empty(), "--terms needs at least one query term");
  std::vector<NeighborList> lists;
  for (const auto& t : terms) lists.push_back(nearest_neighbors(emb, t, r.rc.count("k")));
  r.write("neighbors.csv", neighbor_report_csv(lists));
}

void cmd_w2v_logprob(Run& r) {
  r.use(r.input(0));
  const auto emb = load_embeddings(r.input(0));
  const auto docs = load_proc(r, r.input(1));
  const auto res = median_log_probability(emb, docs, r.rc.count("window"));
  std::ostringstream out;
  out << "id,log_probability\n";
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out << io::csv_escape(docs[i].id) << ',';
    if (!std::isnan(res.per_document[i])) out << io::format_double(res.per_document[i]);
    out << '\n';
  }
  r.write("logprob.csv", out.str());
  std::ostringstream sum;
  sum << "median,scored,skipped\n" << io::format_double(res.median) << ',' << res.scored << ',' << res.skipped << '\n';
  r.write("summary.csv", sum.str());
  r.note("median_log_probability", res.median);
  r.log << "median log probability " << res.median << " over " << res.scored << " documents\n";
}

void cmd_mlm_tokenizer(Run& r) {
  const auto docs = load_raw(r, r.input(0), r.rc.text("format"));
  const auto tok = train_bpe(texts_of(docs), r.rc.count("vocab-size"));
  if (!tok.reached_target())
    r.log << "warning: corpus supports only " << tok.size() << " tokens (asked for " << r.rc.count("vocab-size") << ")\n";
  save_tokenizer(tok, r.output("tokenizer.json"));
  r.note("vocab_size", tok.size());
  r.note("reached_target", tok.reached_target());
}

TransformerConfig transformer_config(const RunConfig& rc, std::size_t vocab_size) {
  TransformerConfig c;
  c.layers = rc.count("layers");
  c.heads = rc.count("heads");
  c.d_model = rc.count("d-model");
  c.d_ff = rc.count("d-ff");
  c.max_seq = rc.count("max-seq");
  c.vocab_size = vocab_size;
  c.mask_fraction = rc.real("mask-fraction");
  c.batch_size = rc.count("batch-size");
  c.epochs = rc.count("epochs");
  c.initial_lr = rc.real("lr");
  c.init_scale = rc.real("init-scale");
  c.seed = derive_seed(rc.seed, "cli:mlm");
  return c;
}

void cmd_mlm_train(Run& r) {
  const auto train = load_raw(r, r.input(0), "auto");
  r.use(r.input(1));
  const auto tok = load_tokenizer(r.input(1));
  std::vector<RawDocument> val;
  if (r.has_input(2)) val = load_raw(r, r.input(2), "auto");
  const auto config = transformer_config(r.rc, tok.size());
  const auto result = train_mlm(texts_of(train), texts_of(val), tok, config, [&](const EpochMetrics& m) {
    r.log << "epoch " << m.epoch << " train_loss " << m.train_loss << " val_loss " << m.val_loss << " val_acc "
          << m.val_accuracy << '\n';
  });
  save_transformer(result.model, r.output("model.json"));
  r.output("model.bin");
  r.write("metrics.csv", metrics_csv(result.metrics));
  r.note("best_epoch", result.best_epoch);
  r.note("best_val_accuracy", result.metrics[result.best_epoch - 1].val_accuracy);
  r.log << "best epoch " << result.best_epoch << '\n';
}

void cmd_mlm_eval(Run& r) {
  r.use(r.input(0));
  const auto model = load_transformer(r.input(0));
  r.use(r.input(1));
  const auto tok = load_tokenizer(r.input(1));
  const auto docs = load_raw(r, r.input(2), "auto");
  const auto seqs = encode_sequences(tok, texts_of(docs), model.config().max_seq);
  require(!seqs.empty(), "evaluation corpus encodes to no tokens");
  const auto ev = evaluate_masked(model, seqs, r.rc.real("mask-fraction"), r.rc.seed);
  std::ostringstream out;
  out << "loss,accuracy,masked_positions\n"
      << io::format_double(ev.loss) << ',' << io::format_double(ev.accuracy) << ',' << ev.masked_positions << '\n';
  r.write("eval.csv", out.str());
  r.note("accuracy", ev.accuracy);
  r.log << "masked accuracy " << ev.accuracy << "% over " << ev.masked_positions << " positions\n";
}

void cmd_mlm_predict(Run& r) {
  r.use(r.input(0));
  const auto model = load_transformer(r.input(0));
  r.use(r.input(1));
  const auto tok = load_tokenizer(r.input(1));
  const auto preds = predict_masked(model, tok, r.rc.text("text"), r.rc.count("k"));
  std::ostringstream out;
  out << "rank,token,probability\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out << i + 1 << ',' << io::csv_escape(preds[i].first) << ',' << io::format_double(preds[i].second) << '\n';
    r.log << i + 1 << "\t'" << preds[i].first << "'\t" << preds[i].second << '\n';
  }
  r.write("predictions.csv", out.str());
}

void cmd_featurize(Run& r) {
  const auto method = parse_feature_method(r.rc.text("method"));
  std::vector<FeatureVector> feats;
  if (method == FeatureMethod::TransformerMean) {
    const auto docs = load_raw(r, r.input(0), "auto");
    r.use(r.input(1));
    const auto model = load_transformer(r.input(1));
    r.use(r.input(2));
    const auto tok = load_tokenizer(r.input(2));
    feats.resize(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) { feats[i] = featurize_transformer(model, tok, docs[i]); });
  } else if (method == FeatureMethod::W2vMean) {
    const auto docs = load_proc(r, r.input(0));
    r.use(r.input(1));
    const auto emb = load_embeddings(r.input(1));
    for (const auto& d : docs) feats.push_back(featurize_w2v(emb, d));
  } else {
    const auto docs = load_proc(r, r.input(0));
    r.use(r.input(1));
    const auto model = load_lda(r.input(1));
    feats.resize(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) {
      feats[i] = featurize_lda(model, docs[i], r.rc.count("iterations"), derive_seed(r.rc.seed, docs[i].id));
    });
  }
  r.write("features.csv", features_csv(feats));
  r.note("documents", feats.size());
}

void cmd_classify_cv(Run& r) {
  r.use(r.input(0));
  const auto feats = parse_features_csv(io::read_file(r.input(0)));
  require(!feats.empty(), "features file has no rows");
  std::string method = r.rc.text("method");
  if (method.empty()) method = std::string(to_string(feats.front().method));
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto& f : feats) {
    if (to_string(f.method) != method)
      fail(ErrorKind::InvalidData, "features row " + f.id + " uses " + std::string(to_string(f.method)) + ", expected " + method);
    if (!f.label) continue;
    x.push_back(f.values);
    y.push_back(static_cast<int>(*f.label));
  }
  require(!x.empty(), "features file has no labeled rows");
  RfConfig c;
  c.trees = r.rc.count("trees");
  if (r.rc.count("max-depth") > 0) c.max_depth = r.rc.count("max-depth");
  c.bootstrap = r.rc.flag("bootstrap");
  c.seed = derive_seed(r.rc.seed, "cli:rf");
  const double holdout = r.rc.real("holdout");
  CvReport report = holdout > 0.0 ? holdout_validate(x, y, holdout, c, r.rc.seed)
                                  : cross_validate(x, y, r.rc.count("folds"), c, r.rc.seed);
  report.method = method;
  r.write("report.csv", cv_report_csv({report}));
  r.write("forest.json", forest_to_json(fit_random_forest(x, y, c)));
  r.note("mean_accuracy", report.mean);
  r.note("std", report.std);
  r.log << method << ": mean accuracy " << report.mean << " (std " << report.std << ")\n";
}

void cmd_baseline(Run& r) {
  const auto docs = load_raw(r, r.input(0), "auto");
  std::ostringstream out;
  out << "id,label,predicted,correct\n";
  for (const auto& d : docs) {
    if (!d.label) continue;
    const auto pred = keyword_baseline(d.text);
    const auto truth = parse_abstract_class(*d.label);
    out << io::csv_escape(d.id) << ',' << io::csv_escape(*d.label) << ',' << (pred ? to_string(*pred) : "") << ','
        << (pred && pred == truth ? 1 : 0) << '\n';
  }
  const double acc = baseline_accuracy(docs);
  r.write("predictions.csv", out.str());
  CvReport rep;
  rep.method = "keyword-baseline";
  rep.fold_accuracies = {acc};
  rep.mean = acc;
  r.write("report.csv", cv_report_csv({rep}));
  r.note("accuracy", acc);
  r.log << "keyword baseline accuracy " << acc << '\n';
}

void cmd_tsne(Run& r) {
  r.use(r.input(0));
  const auto emb = load_embeddings(r.input(0));
  std::vector<std::string> terms = split_list(r.rc.text("terms"));
  if (terms.empty()) {
    const auto n = std::min(emb.vocab_size(), r.rc.count("limit"));
    terms.assign(emb.vocab().terms().begin(), emb.vocab().terms().begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::vector<double> vectors;
  for (const auto& t : terms) {
    const auto i = emb.vocab().index(t);
    if (!i) fail(ErrorKind::InvalidArgument, "term not in embedding vocabulary: " + t);
    const auto row = emb.input_row(*i);
    vectors.insert(vectors.end(), row.begin(), row.end());
  }
  TsneConfig c;
  c.perplexity = r.rc.real("perplexity");
  c.iterations = r.rc.count("iterations");
  c.learning_rate = r.rc.real("lr");
  c.seed = derive_seed(r.rc.seed, "cli:tsne");
  const auto proj = tsne_project(vectors, emb.dim(), terms, c);
  const auto hl = split_list(r.rc.text("highlight"));
  r.output("projection.csv");
  r.output("projection.svg");
  export_scatter(proj, r.rc.out_dir / "projection", std::set<std::string>(hl.begin(), hl.end()));
  std::ostringstream kl;
  kl << "initial_kl,final_kl\n" << io::format_double(proj.initial_kl) << ',' << io::format_double(proj.final_kl) << '\n';
  r.write("kl.csv", kl.str());
  r.note("final_kl", proj.final_kl);
  r.log << "t-SNE KL " << proj.initial_kl << " -> " << proj.final_kl << '\n';
}

void cmd_synth_corpus(Run& r) {
  const auto& kind = r.rc.text("kind");
  std::vector<RawDocument> docs;
  if (kind == "topics") {
    synthetic::TopicCorpusOptions o;
    o.documents = r.rc.count("documents");
    docs = synthetic::make_topic_corpus(o, r.rc.seed).docs;
  } else if (kind == "cooccurrence") {
    docs = synthetic::make_cooccurrence_corpus(r.rc.seed);
  } else if (kind == "abstracts") {
    synthetic::AbstractOptions o;
    o.per_class = r.rc.count("per-class");
    docs = synthetic::make_labeled_abstracts(o, r.rc.seed);
  } else {
    const auto s = synthetic::memorization_sentences();
    for (std::size_t i = 0; i < s.size(); ++i)
      docs.push_back(RawDocument{"sentence" + std::to_string(i), "synthetic", s[i], std::nullopt});
  }
  r.write("corpus.jsonl", corpus_to_jsonl(docs));
  r.note("documents", docs.size());
  r.log << "wrote " << docs.size() << " " << kind << " documents\n";
}

const std::vector<Command>& commands() {
  static const std::vector<Param> kTransformerParams{
      {"layers", Kind::Count, "4", "encoder layers"},
      {"heads", Kind::Count, "4", "attention heads"},
      {"d-model", Kind::Count, "128", "hidden width"},
      {"d-ff", Kind::Count, "512", "feed-forward width"},
      {"max-seq", Kind::Count, "128", "longest window in tokens"},
      {"mask-fraction", Kind::Real, "0.15", "share of tokens selected for prediction"},
      {"batch-size", Kind::Count, "32", "sequences per update"},
      {"epochs", Kind::Count, "20", "passes over the training set"},
      {"lr", Kind::Real, "0.001", "Adam step size"},
      {"init-scale", Kind::Real, "0.02", "stddev of initial weights"},
  };
  static const std::vector<Command> list = [] {
    std::vector<Command> c;
    c.push_back({"preprocess", "normalize, drop stopwords and numbers, merge aliases, stem", {"corpus"},
                 {{"format", Kind::Choice, "auto", "corpus layout", {"auto", "jsonl", "textdir"}},
                  {"stoplist", Kind::Text, "", "stopword file (default: built-in list)"},
                  {"synonyms", Kind::Text, "", "alias TSV (default: built-in table)"},
                  {"stemming", Kind::Flag, "true", "apply the suffix stripper"}},
                 cmd_preprocess});
    c.push_back({"split", "seeded train/validation split of a JSONL corpus", {"corpus"},
                 {{"fraction", Kind::Real, "0.8", "training share"}}, cmd_split});
    c.push_back({"lda-train", "fit a topic model by collapsed Gibbs sampling", {"processed"},
                 {{"topics", Kind::Count, "300", "number of topics K"},
                  {"alpha", Kind::Real, "1", "document-topic prior"},
                  {"beta", Kind::RealOrAuto, "auto", "topic-word prior (auto = 1/K)"},
                  {"iterations", Kind::Count, "400", "Gibbs sweeps"},
                  {"burn-in", Kind::Count, "100", "sweeps before phi averaging"},
                  {"min-count", Kind::Count, "1", "vocabulary frequency floor"},
                  {"top", Kind::Count, "10", "words per topic in topics.csv"}},
                 cmd_lda_train});
    c.push_back({"lda-topics", "list the top words of every topic", {"model"},
                 {{"top", Kind::Count, "10", "words per topic"}}, cmd_lda_topics});
    c.push_back({"lda-infer", "infer topic mixtures for documents", {"model", "processed"},
                 {{"iterations", Kind::Count, "100", "fold-in sweeps"},
                  {"threshold", Kind::Real, "0.1", "report topics above this share"}},
                 cmd_lda_infer});
    c.push_back({"lda-perplexity", "held-out perplexity", {"model", "processed"},
                 {{"iterations", Kind::Count, "100", "fold-in sweeps"}}, cmd_lda_perplexity});
    c.push_back({"w2v-train", "train word vectors with negative sampling", {"processed"},
                 {{"dim", Kind::Count, "300", "vector size"},
                  {"window", Kind::Count, "2", "context half-width"},
                  {"min-count", Kind::Count, "20", "vocabulary frequency floor"},
                  {"variant", Kind::Choice, "cbow", "architecture", {"cbow", "skipgram"}},
                  {"negatives", Kind::Count, "5", "noise words per update"},
                  {"epochs", Kind::Count, "5", "passes over the corpus"},
                  {"lr", Kind::Real, "0.025", "initial learning rate"},
                  {"workers", Kind::Count, "1", "training threads (>1 is nondeterministic)"}},
                 cmd_w2v_train});
    c.push_back({"w2v-neighbors", "nearest neighbors by cosine similarity", {"embeddings"},
                 {{"terms", Kind::Text, "", "comma-separated query terms"}, {"k", Kind::Count, "10", "neighbors per term"}},
                 cmd_w2v_neighbors});
    c.push_back({"w2v-logprob", "per-document log probability and its median", {"embeddings", "processed"},
                 {{"window", Kind::Count, "2", "context half-width"}}, cmd_w2v_logprob});
    c.push_back({"mlm-tokenizer", "train a byte-pair tokenizer", {"corpus"},
                 {{"vocab-size", Kind::Count, "8000", "target vocabulary size"},
                  {"format", Kind::Choice, "auto", "corpus layout", {"auto", "jsonl", "textdir"}}},
                 cmd_mlm_tokenizer});
    c.push_back({"mlm-train", "train a masked-token transformer", {"corpus", "tokenizer", "validation?"},
                 kTransformerParams, cmd_mlm_train});
    c.push_back({"mlm-eval", "masked-token loss and accuracy", {"model", "tokenizer", "corpus"},
                 {{"mask-fraction", Kind::Real, "0.15", "share of tokens masked"}}, cmd_mlm_eval});
    c.push_back({"mlm-predict", "fill the [MASK] in a sentence", {"model", "tokenizer"},
                 {{"text", Kind::Text, "", "sentence with exactly one [MASK]"}, {"k", Kind::Count, "5", "candidates"}},
                 cmd_mlm_predict});
    c.push_back({"featurize", "document vectors for classification", {"corpus", "model", "tokenizer?"},
                 {{"method", Kind::Choice, "w2v-mean", "featurization", {"lda-theta", "w2v-mean", "transformer-mean"}},
                  {"iterations", Kind::Count, "100", "fold-in sweeps for lda-theta"}},
                 cmd_featurize});
    c.push_back({"classify-cv", "random forest with stratified cross-validation", {"features"},
                 {{"method", Kind::Text, "", "expected featurization (default: from the file)"},
                  {"folds", Kind::Count, "5", "k"},
                  {"trees", Kind::Count, "200", "forest size"},
                  {"max-depth", Kind::Count, "0", "tree depth cap (0 = unlimited)"},
                  {"bootstrap", Kind::Flag, "true", "resample rows per tree"},
                  {"holdout", Kind::Real, "0", "single holdout test share instead of k folds (0 = off)"}},
                 cmd_classify_cv});
    c.push_back({"baseline", "keyword classifier accuracy", {"corpus"}, {}, cmd_baseline});
    c.push_back({"tsne", "2-D projection of word vectors", {"embeddings"},
                 {{"perplexity", Kind::Real, "5", "target perplexity"},
                  {"iterations", Kind::Count, "1000", "gradient steps"},
                  {"lr", Kind::Real, "200", "learning rate"},
                  {"limit", Kind::Count, "300", "most frequent terms to project when --terms is empty"},
                  {"terms", Kind::Text, "", "comma-separated terms to project"},
                  {"highlight", Kind::Text, "", "comma-separated terms drawn emphasized"}},
                 cmd_tsne});
    c.push_back({"synth-corpus", "generate a synthetic corpus", {},
                 {{"kind", Kind::Choice, "abstracts", "corpus kind", {"topics", "cooccurrence", "abstracts", "memorization"}},
                  {"documents", Kind::Count, "200", "documents for kind=topics"},
                  {"per-class", Kind::Count, "50", "abstracts per class for kind=abstracts"}},
                 cmd_synth_corpus});
    return c;
  }();
  return list;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingInput: return kMissingInput;
    case ErrorKind::Numeric: return kNumeric;
    case ErrorKind::InvalidArgument: return kUsage;
    case ErrorKind::InvalidData:
    case ErrorKind::Io: return kFailure;
  }
  return kFailure;
}

}  // namespace

int execute(const RunConfig& config, std::ostream& log) {
  const Command* cmd = find_command(config.command);
  if (!cmd) {
    log << "unknown command '" << config.command << "'\n";
    return kUsage;
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    for (const auto& in : config.inputs)
      if (!fs::exists(in)) fail(ErrorKind::MissingInput, "input not found: " + in.string());
    Run r(config, log);
    cmd->body(r);
    r.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    return kOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto parsed = parse_invocation(args);
  if (!parsed.config) {
    auto& stream = parsed.exit_code == kOk ? out : err;
    stream << parsed.message;
    if (!parsed.message.empty() && parsed.message.back() != '\n') stream << '\n';
    return parsed.exit_code;
  }
  return execute(*parsed.config, err);
}

}  // namespace energetext::cli
