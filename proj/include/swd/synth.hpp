#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "swd/corpus.hpp"

namespace swd {

enum class KeyPosition { kFixed, kUniform };
enum class SummaryTransform { kCopy, kPrefix };

/// Needle-in-haystack corpus: one key sentence per document determines the
/// summary, the rest is noise.
struct SynthSpec {
  // Distinct content characters. The first half is key material, the second
  // half noise material.
  std::size_t vocab_size = 20;
  std::size_t pairs = 100;
  std::size_t sentences = 6;
  std::size_t sentence_length = 10;  // characters before the closing '.'
  KeyPosition key_position = KeyPosition::kUniform;
  std::size_t key_index = 0;  // used with KeyPosition::kFixed
  SummaryTransform summary = SummaryTransform::kCopy;
  std::size_t prefix_k = 5;
  // Each distractor carries floor(rate * |summary|) characters taken from
  // the summary.
  double noise_overlap = 0.0;
  std::size_t max_sentences = 20;
  std::uint64_t seed = 1;

  /// Throws GenerationError when the spec cannot be realized.
  void validate() const;
};

struct SynthCorpus {
  std::vector<RawPair> pairs;
  std::vector<std::size_t> keys;  // zero-based key sentence per pair
};

/// Characters available to the generator, in the order they are assigned.
inline constexpr std::string_view kSynthAlphabet =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

SynthCorpus generate(const SynthSpec& spec);

/// Reads a key=value spec file; unknown keys are ConfigErrors.
SynthSpec read_synth_spec(const std::filesystem::path& path);

void write_keys(const std::filesystem::path& path, const std::vector<std::size_t>& keys);
std::vector<std::size_t> read_keys(const std::filesystem::path& path);

}  // namespace swd
