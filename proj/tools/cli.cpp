#include "swd/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "swd/checkpoint.hpp"
#include "swd/config.hpp"
#include "swd/errors.hpp"
#include "swd/synth.hpp"
#include "swd/trainer.hpp"
#include "swd/weights.hpp"

namespace swd::cli {

namespace fs = std::filesystem;

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<RawPair> read_corpus(const fs::path& path, const std::string& format) {
  const bool tsv = format == "tsv" || (format.empty() && path.extension() == ".tsv");
  return tsv ? read_tsv(path) : read_jsonl(path);
}

// --- rouge -----------------------------------------------------------------

struct RougeArgs {
  std::string candidate;
  std::string reference;
  std::string variant = "1";
  std::string tokens = "char";
  double beta = 1.0;
};

int run_rouge(const RougeArgs& a, std::ostream& out) {
  rouge::Selector sel;
  sel.variant = rouge::parse_variant(a.variant);
  sel.beta = a.beta;
  CorpusOptions opts;
  if (a.tokens == "word") opts.tokenization = Tokenization::kWord;
  const auto cand = read_lines(a.candidate);
  const auto ref = read_lines(a.reference);
  if (cand.size() != ref.size()) {
    throw FormatError(a.candidate + " has " + std::to_string(cand.size()) + " lines but " + a.reference + " has " +
                      std::to_string(ref.size()));
  }
  out << "line\tP\tR\tF\n";
  rouge::Score mean;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const auto c = token_strings(cand[i], opts);
    const auto r = token_strings(ref[i], opts);
    const auto s = rouge::score(std::span<const std::string>(c), std::span<const std::string>(r), sel.variant, sel.beta);
    out << i + 1 << '\t' << pct(s.precision) << '\t' << pct(s.recall) << '\t' << pct(s.f) << '\n';
    mean.precision += s.precision;
    mean.recall += s.recall;
    mean.f += s.f;
  }
  const double n = cand.empty() ? 1.0 : static_cast<double>(cand.size());
  out << "mean\t" << pct(mean.precision / n) << '\t' << pct(mean.recall / n) << '\t' << pct(mean.f / n) << '\n';
  return kExitOk;
}

// --- estimate-weights --------------------------------------------------------

struct EstimateArgs {
  std::string corpus;
  std::string out;
  std::string config;
  std::string format;
  std::optional<std::string> variant;
  std::optional<std::string> measure;
  std::optional<double> beta;
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config = path.empty() ? RunConfig{} : load_run_config(path);
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

int run_estimate(const EstimateArgs& a, std::ostream& out) {
  RunConfig config = resolve_config(a.config, a.overrides);
  if (a.variant) config.rouge.variant = rouge::parse_variant(*a.variant);
  if (a.measure) config.rouge.measure = rouge::parse_measure(*a.measure);
  if (a.beta) config.rouge.beta = *a.beta;
  const auto raw = read_corpus(a.corpus, a.format);
  // Every token gets its own id here so ROUGE never matches two unknowns.
  CorpusOptions opts = config.corpus;
  opts.min_count = 1;
  const Vocab vocab = build_vocab(raw, opts);
  const auto corpus = encode_corpus(raw, vocab, opts);
  const auto weights = estimate_corpus_weights(corpus, config.rouge);
  write_weights(a.out, weights);
  out << "wrote " << weights.size() << " weight distributions to " << a.out << '\n';
  return kExitOk;
}

// --- synth -----------------------------------------------------------------

int run_synth(const std::string& spec_path, const std::string& dir, std::ostream& out) {
  const SynthSpec spec = read_synth_spec(spec_path);
  const SynthCorpus corpus = generate(spec);
  fs::create_directories(dir);
  write_jsonl(fs::path(dir) / "corpus.jsonl", corpus.pairs);
  write_keys(fs::path(dir) / "keys.txt", corpus.keys);
  out << "wrote " << corpus.pairs.size() << " pairs to " << dir << '\n';
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string weights;
  std::string out;
  std::string baseline;
  std::string valid;
  std::string format;
  std::vector<std::string> overrides;
};

void apply_baseline(RunConfig& c, const std::string& baseline) {
  if (baseline.empty()) return;
  if (baseline == "rnn") {
    c.model.attention = false;
    c.model.swd = false;
    c.train.lambda = 0.0;
  } else if (baseline == "rnn-context") {
    c.model.attention = true;
    c.model.swd = false;
    c.train.lambda = 0.0;
  } else if (baseline == "rnn-swd") {
    c.model.attention = false;
    c.model.swd = true;
  } else if (baseline == "swd") {
    c.model.attention = true;
    c.model.swd = true;
  } else {
    throw ConfigError("unknown baseline '" + baseline + "'");
  }
}

Checkpoint make_checkpoint(const SwdModel& model, const RunConfig& config, const Vocab& vocab,
                           std::size_t step, std::size_t epoch, const std::vector<double>& history) {
  Checkpoint c;
  c.model = model.config();
  c.vocab_path = "vocab.txt";
  c.params = model.params();
  c.meta.step = step;
  c.meta.epoch = epoch;
  c.meta.seed = config.train.seed;
  c.meta.loss_history = history;
  c.meta.tag = model_tag(model.config());
  c.meta.vocab_fingerprint = vocab_fingerprint(vocab);
  c.meta.corpus = config.corpus;
  return c;
}

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  apply_baseline(config, a.baseline);
  for (const auto& o : a.overrides) apply_override(config, o);
  config.train.validate();

  const auto raw = read_corpus(a.corpus, a.format);
  const Vocab vocab = build_vocab(raw, config.corpus);
  const auto corpus = encode_corpus(raw, vocab, config.corpus);
  std::vector<WeightDistribution> weights;
  if (config.model.swd) {
    if (a.weights.empty()) throw ConfigError("--weights is required when the sentence-weight path is enabled");
    weights = read_weights(a.weights);
    check_weights(corpus, weights);
  }
  std::vector<EncodedPair> valid;
  if (!a.valid.empty()) valid = encode_corpus(read_corpus(a.valid, a.format), vocab, config.corpus);

  config.model.vocab_size = vocab.size();
  config.model.max_sentences = config.corpus.max_sentences;
  config.model.validate();
  SwdModel model = SwdModel::initialize(config.model);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_vocab(dir / "vocab.txt", vocab);
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw FormatError("cannot write " + (dir / "train_log.jsonl").string());

  std::vector<double> history;
  double epoch_loss = 0.0;
  std::size_t epoch_steps = 0;
  std::size_t steps = 0;
  std::size_t epochs_done = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) {
    log << to_log_line(r) << '\n';
    log.flush();
    epoch_loss += r.loss;
    ++epoch_steps;
    steps = r.step;
  };
  hooks.on_epoch_end = [&](std::size_t epoch, const SwdModel& m) {
    history.push_back(epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0);
    epoch_loss = 0.0;
    epoch_steps = 0;
    epochs_done = epoch;
    save_checkpoint(make_checkpoint(m, config, vocab, steps, epoch, history), dir / "checkpoint.json");
    std::ostringstream line;
    line << "epoch " << epoch << " loss " << history.back();
    if (!valid.empty()) {
      const double v = mean_token_nll(m, valid, config.train.batch_size);
      line << " valid_nll " << v;
      if (v < best_valid) {
        best_valid = v;
        save_checkpoint(make_checkpoint(m, config, vocab, steps, epoch, history), dir / "best.json");
      }
    }
    err << line.str() << '\n';
  };
  try {
    train(model, config.train, corpus, weights, hooks);
  } catch (const DivergenceError& e) {
    // Parameters are untouched by the failing step, so they are the last good state.
    save_checkpoint(make_checkpoint(model, config, vocab, steps, epochs_done, history), dir / "last_good.json");
    err << "training diverged after step " << steps << ": " << e.what() << "; last good state saved to "
        << (dir / "last_good.json").string() << '\n';
    return kExitDivergence;
  }
  if (config.train.epochs == 0) {
    save_checkpoint(make_checkpoint(model, config, vocab, 0, 0, history), dir / "checkpoint.json");
  }
  out << "trained " << model_tag(model.config()) << " for " << steps << " steps; checkpoint "
      << (dir / "checkpoint.json").string() << '\n';
  return kExitOk;
}

// --- generate / evaluate ---------------------------------------------------

struct LoadedModel {
  Checkpoint checkpoint;
  Vocab vocab;
  fs::path vocab_path;
};

LoadedModel load_model(const fs::path& path) {
  LoadedModel m;
  m.checkpoint = load_checkpoint(path);
  m.vocab_path = resolve_vocab_path(m.checkpoint, path);
  m.vocab = read_vocab(m.vocab_path);
  if (vocab_fingerprint(m.vocab) != m.checkpoint.meta.vocab_fingerprint ||
      m.vocab.size() != m.checkpoint.model.vocab_size) {
    throw CompatibilityError("vocabulary " + m.vocab_path.string() + " does not match checkpoint " + path.string());
  }
  return m;
}

std::size_t default_max_len(const LoadedModel& m, std::optional<std::size_t> max_len) {
  return max_len ? *max_len : m.checkpoint.meta.corpus.max_summary_len;
}

int run_generate(const std::string& model_path, const std::string& input, std::optional<std::size_t> max_len,
                 std::ostream& out) {
  LoadedModel m = load_model(model_path);
  const CorpusOptions& opts = m.checkpoint.meta.corpus;
  SwdModel model(m.checkpoint.model, std::move(m.checkpoint.params));
  const auto lines = read_lines(input);
  std::vector<EncodedPair> docs;
  std::vector<std::size_t> slot(lines.size(), SIZE_MAX);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (clean_text(lines[i]).empty()) continue;
    slot[i] = docs.size();
    docs.push_back({encode_document(lines[i], m.vocab, opts), {}});
  }
  std::vector<std::string> summaries(docs.size());
  const std::size_t limit = default_max_len(m, max_len);
  for (const Batch& batch : make_batches(docs, {}, 32, std::nullopt)) {
    const auto decoded = model.greedy_decode(batch, limit);
    for (std::size_t b = 0; b < batch.size(); ++b) summaries[batch.items[b]] = decode(decoded[b], m.vocab, opts);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) out << (slot[i] == SIZE_MAX ? "" : summaries[slot[i]]) << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::vector<std::string> models;
  std::string corpus;
  std::string vocab;
  std::string format;
  std::string label;
  std::vector<std::string> tags;
  std::optional<std::size_t> max_len;
};

int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (!a.tags.empty() && a.tags.size() != a.models.size()) throw ConfigError("give one --tag per --model");
  const auto raw = read_corpus(a.corpus, a.format);
  const std::string label = a.label.empty() ? fs::path(a.corpus).filename().string() : a.label;
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    LoadedModel m = load_model(a.models[i]);
    if (!a.vocab.empty()) {
      if (!(read_vocab(a.vocab) == m.vocab)) {
        throw CompatibilityError("corpus vocabulary " + a.vocab + " differs from checkpoint vocabulary " +
                                 m.vocab_path.string());
      }
    }
    const auto corpus = encode_corpus(raw, m.vocab, m.checkpoint.meta.corpus);
    const std::string tag = a.tags.empty() ? m.checkpoint.meta.tag : a.tags[i];
    SwdModel model(m.checkpoint.model, std::move(m.checkpoint.params));
    reports.push_back(evaluate(model, corpus, default_max_len(m, a.max_len), tag, label));
  }
  out << format_report(reports);
  return kExitOk;
}

std::string config_keys_footer() {
  std::ostringstream os;
  os << "Configuration keys (--config file or --set):\n";
  for (const auto& [key, help] : run_config_schema()) os << "  " << key << "\n      " << help << "\n";
  return os.str();
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Abstractive summarization with sentence weight distributions", "swdsum"};
  app.require_subcommand(1);

  RougeArgs rouge_args;
  auto* rouge_cmd = app.add_subcommand("rouge", "Score candidate lines against reference lines");
  rouge_cmd->add_option("--candidate", rouge_args.candidate, "Candidate file, one summary per line")->required();
  rouge_cmd->add_option("--reference", rouge_args.reference, "Reference file, one summary per line")->required();
  rouge_cmd->add_option("--variant", rouge_args.variant, "1, 2 or l")->capture_default_str();
  rouge_cmd->add_option("--beta", rouge_args.beta, "F-measure beta")->capture_default_str();
  rouge_cmd->add_option("--tokens", rouge_args.tokens, "Token unit")
      ->check(CLI::IsMember({"char", "word"}))
      ->capture_default_str();

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate-weights", "Write the estimated sentence weight sidecar of a corpus");
  est_cmd->add_option("--corpus", est.corpus, "Corpus file (JSON lines or TSV)")->required();
  est_cmd->add_option("--out", est.out, "Output weight file")->required();
  est_cmd->add_option("--config", est.config, "key = value configuration file");
  est_cmd->add_option("--set", est.overrides, "Override one configuration key (key=value)");
  est_cmd->add_option("--variant", est.variant, "ROUGE variant: 1, 2 or l");
  est_cmd->add_option("--measure", est.measure, "ROUGE measure: p, r or f");
  est_cmd->add_option("--beta", est.beta, "F-measure beta");
  est_cmd->add_option("--format", est.format, "Corpus format (default: by extension)")
      ->check(CLI::IsMember({"jsonl", "tsv"}));

  std::string spec_path, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a needle-in-haystack corpus and its key sentences");
  synth_cmd->add_option("--spec", spec_path, "key = value generator spec")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory (corpus.jsonl, keys.txt)")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoints and a step log");
  train_cmd->add_option("--config", tr.config, "key = value configuration file");
  train_cmd->add_option("--corpus", tr.corpus, "Training corpus")->required();
  train_cmd->add_option("--weights", tr.weights, "Estimated weight sidecar for the corpus");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--baseline", tr.baseline, "Model family")
      ->check(CLI::IsMember({"rnn", "rnn-context", "rnn-swd", "swd"}));
  train_cmd->add_option("--set", tr.overrides, "Override one configuration key (key=value)");
  train_cmd->add_option("--valid", tr.valid, "Validation corpus; keeps best.json by per-token NLL");
  train_cmd->add_option("--format", tr.format, "Corpus format (default: by extension)")
      ->check(CLI::IsMember({"jsonl", "tsv"}));
  train_cmd->footer(config_keys_footer());

  std::string gen_model, gen_input;
  std::optional<std::size_t> gen_max_len;
  auto* gen_cmd = app.add_subcommand("generate", "Greedy-decode one summary per input document line");
  gen_cmd->add_option("--model", gen_model, "Checkpoint file")->required();
  gen_cmd->add_option("--input", gen_input, "Documents, one per line")->required();
  gen_cmd->add_option("--max-len", gen_max_len, "Maximum summary length (default: max_summary_len)");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "ROUGE report of one or more checkpoints on a corpus");
  eval_cmd->add_option("--model", ev.models, "Checkpoint file (repeat for several rows)")->required();
  eval_cmd->add_option("--corpus", ev.corpus, "Corpus with reference summaries")->required();
  eval_cmd->add_option("--vocab", ev.vocab, "Vocabulary the corpus was prepared with; must match the checkpoint");
  eval_cmd->add_option("--format", ev.format, "Corpus format (default: by extension)")
      ->check(CLI::IsMember({"jsonl", "tsv"}));
  eval_cmd->add_option("--label", ev.label, "Corpus label in the report (default: file name)");
  eval_cmd->add_option("--tag", ev.tags, "Row tag per model (default: from the checkpoint)");
  eval_cmd->add_option("--max-len", ev.max_len, "Maximum summary length (default: max_summary_len)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (rouge_cmd->parsed()) return run_rouge(rouge_args, out);
    if (est_cmd->parsed()) return run_estimate(est, out);
    if (synth_cmd->parsed()) return run_synth(spec_path, synth_out, out);
    if (train_cmd->parsed()) return run_train(tr, out, err);
    if (gen_cmd->parsed()) return run_generate(gen_model, gen_input, gen_max_len, out);
    if (eval_cmd->parsed()) return run_evaluate(ev, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace swd::cli
