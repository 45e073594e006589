#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "swd/corpus.hpp"
#include "swd/weights.hpp"

namespace swd {

template <class T>
struct Grid {
  Grid() = default;
  Grid(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;
};

/// Padded minibatch. Rows are items; source columns are token positions in
/// reading order; summary rows are framed as BOS y_1 .. y_m EOS then PAD.
struct Batch {
  std::size_t size() const { return items.size(); }
  std::size_t source_len() const { return source.cols; }
  std::size_t max_sentences() const;
  std::size_t source_length(std::size_t item) const { return word2sen[item].size(); }

  std::vector<std::size_t> items;  // corpus indices
  Grid<int> source;
  Grid<unsigned char> source_mask;
  std::vector<std::vector<std::size_t>> word2sen;
  std::vector<std::size_t> sentence_counts;
  Grid<int> summary;
  Grid<unsigned char> summary_mask;
  // One distribution per item, or empty when weights were not supplied.
  std::vector<std::vector<double>> weights;
};

/// Builds one batch from the listed corpus items. `weights` is either empty
/// or parallel to `corpus`.
Batch make_batch(std::span<const EncodedPair> corpus, std::span<const WeightDistribution> weights,
                 std::span<const std::size_t> indices);

/// Groups the corpus into batches of `batch_size` (the last may be short).
/// With a seed the order is a seeded shuffle; without one it is corpus order.
std::vector<Batch> make_batches(std::span<const EncodedPair> corpus,
                                std::span<const WeightDistribution> weights, std::size_t batch_size,
                                std::optional<std::uint64_t> seed);

}  // namespace swd
