#include "swd/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "swd/errors.hpp"
#include "swd/utf8.hpp"

namespace swd {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                    expected + ")");
}

template <class T>
T parse_number(std::string_view key, std::string_view value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, expected);
  return out;
}

std::u32string unescape_delimiters(std::string_view value) {
  std::string raw;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '\\' && i + 1 < value.size()) {
      const char c = value[++i];
      raw.push_back(c == 'n' ? '\n' : c == 't' ? '\t' : c);
    } else {
      raw.push_back(value[i]);
    }
  }
  return utf8::decode(raw);
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source) {
  std::vector<KeyValue> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    KeyValue kv{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), lineno};
    if (kv.key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<KeyValue> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str(), path.string());
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true or false");
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  return parse_number<std::size_t>(key, value, "a non-negative integer");
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  return parse_number<std::uint64_t>(key, value, "a non-negative integer");
}

double parse_double(std::string_view key, std::string_view value) {
  return parse_number<double>(key, value, "a number");
}

const std::vector<std::pair<std::string, std::string>>& run_config_schema() {
  static const std::vector<std::pair<std::string, std::string>> schema = {
      {"embed_dim", "word embedding width"},
      {"hidden_dim", "encoder/decoder state width (even)"},
      {"position_embed_dim", "sentence position embedding width"},
      {"mlp_hidden_dim", "hidden width of the sentence-weight predictor"},
      {"attention", "additive attention in the decoder (true|false)"},
      {"swd", "sentence-weight path (true|false)"},
      {"detach_weights", "predict weights but feed the decoder unscaled states (true|false)"},
      {"seed", "seed for initialization and shuffling"},
      {"max_sentences", "sentences kept per document"},
      {"max_sentence_len", "tokens kept per sentence"},
      {"max_summary_len", "tokens kept per summary"},
      {"min_count", "minimum token count for the vocabulary"},
      {"tokenization", "char|word"},
      {"delimiters", "sentence delimiter characters (\\n escapes a newline)"},
      {"batch_size", "pairs per minibatch"},
      {"lambda", "weight of the sentence-weight loss term"},
      {"learning_rate", "SGD step size"},
      {"epochs", "passes over the training corpus"},
      {"clip_norm", "global gradient-norm clip"},
      {"weight_loss_form", "estimated-target (-sum w log w') | literal (-sum w' log w)"},
      {"rouge_variant", "1|2|l for weight estimation"},
      {"rouge_measure", "p|r|f for weight estimation"},
      {"rouge_beta", "F-measure beta for weight estimation"},
  };
  return schema;
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  if (key == "embed_dim") {
    c.model.embed_dim = parse_size(key, value);
  } else if (key == "hidden_dim") {
    c.model.hidden_dim = parse_size(key, value);
  } else if (key == "position_embed_dim") {
    c.model.position_embed_dim = parse_size(key, value);
  } else if (key == "mlp_hidden_dim") {
    c.model.mlp_hidden_dim = parse_size(key, value);
  } else if (key == "attention") {
    c.model.attention = parse_bool(key, value);
  } else if (key == "swd") {
    c.model.swd = parse_bool(key, value);
  } else if (key == "detach_weights") {
    c.model.detach_weights = parse_bool(key, value);
  } else if (key == "seed") {
    c.model.seed = c.train.seed = parse_u64(key, value);
  } else if (key == "max_sentences") {
    c.model.max_sentences = c.corpus.max_sentences = parse_size(key, value);
  } else if (key == "max_sentence_len") {
    c.corpus.max_sentence_len = parse_size(key, value);
  } else if (key == "max_summary_len") {
    c.corpus.max_summary_len = parse_size(key, value);
  } else if (key == "min_count") {
    c.corpus.min_count = parse_size(key, value);
  } else if (key == "tokenization") {
    if (value == "char") {
      c.corpus.tokenization = Tokenization::kChar;
    } else if (value == "word") {
      c.corpus.tokenization = Tokenization::kWord;
    } else {
      bad_value(key, value, "char or word");
    }
  } else if (key == "delimiters") {
    c.corpus.delimiters = unescape_delimiters(value);
  } else if (key == "batch_size") {
    c.train.batch_size = parse_size(key, value);
  } else if (key == "lambda") {
    c.train.lambda = parse_double(key, value);
  } else if (key == "learning_rate") {
    c.train.learning_rate = parse_double(key, value);
  } else if (key == "epochs") {
    c.train.epochs = parse_size(key, value);
  } else if (key == "clip_norm") {
    c.train.clip_norm = parse_double(key, value);
  } else if (key == "weight_loss_form") {
    if (value == "estimated-target") {
      c.train.weight_loss_form = WeightLossForm::kEstimatedTarget;
    } else if (value == "literal") {
      c.train.weight_loss_form = WeightLossForm::kLiteral;
    } else {
      bad_value(key, value, "estimated-target or literal");
    }
  } else if (key == "rouge_variant") {
    try {
      c.rouge.variant = rouge::parse_variant(std::string(value));
    } catch (const Error&) {
      bad_value(key, value, "1, 2 or l");
    }
  } else if (key == "rouge_measure") {
    try {
      c.rouge.measure = rouge::parse_measure(std::string(value));
    } catch (const Error&) {
      bad_value(key, value, "p, r or f");
    }
  } else if (key == "rouge_beta") {
    c.rouge.beta = parse_double(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  }
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig config;
  for (const auto& kv : read_key_values(path)) {
    try {
      apply_setting(config, kv.key, kv.value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(kv.line) + ": " + e.what());
    }
  }
  return config;
}

}  // namespace swd
