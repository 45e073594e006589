#include "swd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "swd/config.hpp"
#include "swd/errors.hpp"

namespace swd {

void SynthSpec::validate() const {
  if (vocab_size < 2 || vocab_size > kSynthAlphabet.size()) {
    throw GenerationError("vocab_size must lie in [2, " + std::to_string(kSynthAlphabet.size()) +
                          "] so key and noise alphabets are both non-empty");
  }
  if (pairs < 1) throw GenerationError("pairs must be at least 1");
  if (sentences < 1) throw GenerationError("sentences must be at least 1");
  if (sentences > max_sentences) {
    throw GenerationError("sentences (" + std::to_string(sentences) + ") exceeds max_sentences (" +
                          std::to_string(max_sentences) + ")");
  }
  if (sentence_length < 1) throw GenerationError("sentence_length must be at least 1");
  if (key_position == KeyPosition::kFixed && key_index >= sentences) {
    throw GenerationError("key_index must be below the number of sentences");
  }
  if (summary == SummaryTransform::kPrefix && (prefix_k < 1 || prefix_k > sentence_length)) {
    throw GenerationError("prefix_k must lie in [1, sentence_length]");
  }
  if (!(noise_overlap >= 0.0 && noise_overlap < 1.0)) {
    throw GenerationError("noise_overlap must lie in [0, 1)");
  }
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t key_chars = spec.vocab_size / 2;
  const std::string_view key_alpha = kSynthAlphabet.substr(0, key_chars);
  const std::string_view noise_alpha = kSynthAlphabet.substr(key_chars, spec.vocab_size - key_chars);
  const std::size_t summary_len =
      spec.summary == SummaryTransform::kCopy ? spec.sentence_length : spec.prefix_k;
  const auto overlap = static_cast<std::size_t>(std::floor(spec.noise_overlap * static_cast<double>(summary_len)));

  std::mt19937_64 rng(spec.seed);
  auto draw = [&rng](std::string_view alpha) {
    return alpha[std::uniform_int_distribution<std::size_t>(0, alpha.size() - 1)(rng)];
  };
  std::vector<std::size_t> positions(spec.sentence_length);
  std::vector<std::size_t> summary_positions(summary_len);

  SynthCorpus out;
  out.pairs.reserve(spec.pairs);
  out.keys.reserve(spec.pairs);
  for (std::size_t p = 0; p < spec.pairs; ++p) {
    const std::size_t key = spec.key_position == KeyPosition::kFixed
                                ? spec.key_index
                                : std::uniform_int_distribution<std::size_t>(0, spec.sentences - 1)(rng);
    std::string key_sentence;
    for (std::size_t i = 0; i < spec.sentence_length; ++i) key_sentence.push_back(draw(key_alpha));
    const std::string summary = key_sentence.substr(0, summary_len);

    std::string text;
    for (std::size_t s = 0; s < spec.sentences; ++s) {
      std::string sentence;
      if (s == key) {
        sentence = key_sentence;
      } else {
        for (std::size_t i = 0; i < spec.sentence_length; ++i) sentence.push_back(draw(noise_alpha));
        if (overlap > 0) {
          std::iota(positions.begin(), positions.end(), 0);
          std::shuffle(positions.begin(), positions.end(), rng);
          std::iota(summary_positions.begin(), summary_positions.end(), 0);
          std::shuffle(summary_positions.begin(), summary_positions.end(), rng);
          for (std::size_t i = 0; i < overlap; ++i) sentence[positions[i]] = summary[summary_positions[i]];
        }
      }
      if (!text.empty()) text.push_back(' ');
      text += sentence;
      text.push_back('.');
    }
    out.pairs.push_back({std::move(text), summary});
    out.keys.push_back(key);
  }
  return out;
}

SynthSpec read_synth_spec(const std::filesystem::path& path) {
  SynthSpec spec;
  for (const auto& kv : read_key_values(path)) {
    const std::string& k = kv.key;
    const std::string& v = kv.value;
    try {
      if (k == "vocab_size") {
        spec.vocab_size = parse_size(k, v);
      } else if (k == "pairs") {
        spec.pairs = parse_size(k, v);
      } else if (k == "sentences") {
        spec.sentences = parse_size(k, v);
      } else if (k == "sentence_length") {
        spec.sentence_length = parse_size(k, v);
      } else if (k == "key_position") {
        if (v == "fixed") {
          spec.key_position = KeyPosition::kFixed;
        } else if (v == "uniform") {
          spec.key_position = KeyPosition::kUniform;
        } else {
          throw ConfigError("key_position must be fixed or uniform");
        }
      } else if (k == "key_index") {
        spec.key_index = parse_size(k, v);
      } else if (k == "summary") {
        if (v == "copy") {
          spec.summary = SummaryTransform::kCopy;
        } else if (v == "prefix") {
          spec.summary = SummaryTransform::kPrefix;
        } else {
          throw ConfigError("summary must be copy or prefix");
        }
      } else if (k == "prefix_k") {
        spec.prefix_k = parse_size(k, v);
      } else if (k == "noise_overlap") {
        spec.noise_overlap = parse_double(k, v);
      } else if (k == "max_sentences") {
        spec.max_sentences = parse_size(k, v);
      } else if (k == "seed") {
        spec.seed = parse_u64(k, v);
      } else {
        throw ConfigError("unknown spec key '" + k + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(kv.line) + ": " + e.what());
    }
  }
  return spec;
}

void write_keys(const std::filesystem::path& path, const std::vector<std::size_t>& keys) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (std::size_t k : keys) out << k << '\n';
}

std::vector<std::size_t> read_keys(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::size_t> keys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      keys.push_back(parse_size("key", line.substr(0, line.find_last_not_of(" \t\r") + 1)));
    } catch (const ConfigError&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": not a sentence index");
    }
  }
  return keys;
}

}  // namespace swd
