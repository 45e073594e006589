#include "swd/batch.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "swd/errors.hpp"

namespace swd {

std::size_t Batch::max_sentences() const {
  return sentence_counts.empty() ? 0 : *std::max_element(sentence_counts.begin(), sentence_counts.end());
}

Batch make_batch(std::span<const EncodedPair> corpus, std::span<const WeightDistribution> weights,
                 std::span<const std::size_t> indices) {
  if (!weights.empty() && weights.size() != corpus.size()) {
    throw ArgumentError("weights must be empty or parallel to the corpus");
  }
  Batch b;
  b.items.assign(indices.begin(), indices.end());
  std::size_t src_len = 0, sum_len = 0;
  for (std::size_t i : indices) {
    src_len = std::max(src_len, corpus[i].doc.total_words());
    sum_len = std::max(sum_len, corpus[i].summary.size());
  }
  const std::size_t n = indices.size();
  b.source = Grid<int>(n, src_len, kPad);
  b.source_mask = Grid<unsigned char>(n, src_len, 0);
  b.summary = Grid<int>(n, sum_len + 2, kPad);
  b.summary_mask = Grid<unsigned char>(n, sum_len + 2, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const EncodedPair& p = corpus[indices[r]];
    const auto flat = p.doc.flat_tokens();
    for (std::size_t t = 0; t < flat.size(); ++t) {
      b.source(r, t) = flat[t];
      b.source_mask(r, t) = 1;
    }
    b.word2sen.push_back(p.doc.word2sen);
    b.sentence_counts.push_back(p.doc.num_sentences());

    b.summary(r, 0) = kBos;
    for (std::size_t t = 0; t < p.summary.size(); ++t) b.summary(r, t + 1) = p.summary[t];
    b.summary(r, p.summary.size() + 1) = kEos;
    for (std::size_t t = 0; t < p.summary.size() + 2; ++t) b.summary_mask(r, t) = 1;

    if (!weights.empty()) {
      const auto& w = weights[indices[r]].weights;
      if (w.size() != p.doc.num_sentences()) {
        throw FormatError("item " + std::to_string(indices[r] + 1) + ": " + std::to_string(w.size()) +
                          " weights for " + std::to_string(p.doc.num_sentences()) + " sentences");
      }
      b.weights.push_back(w);
    }
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const EncodedPair> corpus,
                                std::span<const WeightDistribution> weights, std::size_t batch_size,
                                std::optional<std::uint64_t> seed) {
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  if (seed) {
    std::mt19937_64 rng(*seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    out.push_back(make_batch(corpus, weights, std::span<const std::size_t>(order).subspan(start, len)));
  }
  return out;
}

}  // namespace swd
