#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "swd/corpus.hpp"
#include "swd/rouge.hpp"

namespace swd {

/// Per-sentence relevance distribution: positive entries summing to 1.
struct WeightDistribution {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  friend bool operator==(const WeightDistribution&, const WeightDistribution&) = default;
};

/// Raw ROUGE score of every sentence against the summary.
std::vector<double> sentence_scores(const Document& doc, std::span<const int> summary,
                                    const rouge::Selector& selector = {});

/// Softmax of the raw scores (max-subtracted).
WeightDistribution normalize_weights(std::span<const double> scores);

/// Scores and normalizes every pair; OpenMP-parallel over pairs.
std::vector<WeightDistribution> estimate_corpus_weights(std::span<const EncodedPair> corpus,
                                                        const rouge::Selector& selector = {});
/// Single-threaded reference for the parallel version.
std::vector<WeightDistribution> estimate_corpus_weights_serial(std::span<const EncodedPair> corpus,
                                                               const rouge::Selector& selector = {});

/// Throws FormatError unless each distribution matches its document's
/// sentence count and is a valid distribution.
void check_weights(std::span<const EncodedPair> corpus, std::span<const WeightDistribution> weights);

/// Sidecar: one JSON array of floats per line, parallel to the corpus.
void write_weights(const std::filesystem::path& path, std::span<const WeightDistribution> weights);
std::vector<WeightDistribution> read_weights(const std::filesystem::path& path);

}  // namespace swd
