#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "swd/errors.hpp"

// ROUGE-N and ROUGE-L over arbitrary token types. All functions are pure.
namespace swd::rouge {

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// (1 + b^2) P R / (R + b^2 P), or 0 when P + R == 0.
inline double f_measure(double precision, double recall, double beta = 1.0) {
  const double b2 = beta * beta;
  const double denom = recall + b2 * precision;
  if (precision + recall <= 0.0 || denom <= 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

inline Score make_score(std::size_t hits, std::size_t candidate_total, std::size_t reference_total,
                        double beta) {
  Score s;
  s.precision = candidate_total ? static_cast<double>(hits) / static_cast<double>(candidate_total) : 0.0;
  s.recall = reference_total ? static_cast<double>(hits) / static_cast<double>(reference_total) : 0.0;
  s.f = f_measure(s.precision, s.recall, beta);
  return s;
}

template <class T>
using NgramCounts = std::map<std::vector<T>, std::size_t>;

template <class T>
NgramCounts<T> ngram_counts(std::span<const T> seq, std::size_t n) {
  if (n < 1) throw ArgumentError("n-gram order must be at least 1");
  NgramCounts<T> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<T>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                            seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

/// Candidate n-gram matches are clipped to their reference multiplicity.
template <class T>
Score rouge_n(std::span<const T> candidate, std::span<const T> reference, std::size_t n,
              double beta = 1.0) {
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t hits = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) hits += std::min(c, it->second);
  }
  const std::size_t cand_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  const std::size_t ref_total = reference.size() >= n ? reference.size() - n + 1 : 0;
  return make_score(hits, cand_total, ref_total, beta);
}

template <class T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <class T>
Score rouge_l(std::span<const T> candidate, std::span<const T> reference, double beta = 1.0) {
  return make_score(lcs_length(candidate, reference), candidate.size(), reference.size(), beta);
}

// Convenience overloads so vectors and strings bind without spelling spans.
template <class T>
Score rouge_n(const std::vector<T>& c, const std::vector<T>& r, std::size_t n, double beta = 1.0) {
  return rouge_n(std::span<const T>(c), std::span<const T>(r), n, beta);
}
template <class T>
Score rouge_l(const std::vector<T>& c, const std::vector<T>& r, double beta = 1.0) {
  return rouge_l(std::span<const T>(c), std::span<const T>(r), beta);
}
template <class T>
std::size_t lcs_length(const std::vector<T>& a, const std::vector<T>& b) {
  return lcs_length(std::span<const T>(a), std::span<const T>(b));
}
inline std::size_t lcs_length(const std::string& a, const std::string& b) {
  return lcs_length(std::span<const char>(a), std::span<const char>(b));
}

enum class Variant { kRouge1, kRouge2, kRougeL };
enum class Measure { kPrecision, kRecall, kF };

/// Which ROUGE number to use when one scalar is needed.
struct Selector {
  Variant variant = Variant::kRouge1;
  Measure measure = Measure::kF;
  double beta = 1.0;
};

template <class T>
Score score(std::span<const T> candidate, std::span<const T> reference, Variant v, double beta = 1.0) {
  switch (v) {
    case Variant::kRouge1:
      return rouge_n(candidate, reference, 1, beta);
    case Variant::kRouge2:
      return rouge_n(candidate, reference, 2, beta);
    case Variant::kRougeL:
      return rouge_l(candidate, reference, beta);
  }
  return {};
}

inline double pick(const Score& s, Measure m) {
  switch (m) {
    case Measure::kPrecision:
      return s.precision;
    case Measure::kRecall:
      return s.recall;
    case Measure::kF:
      return s.f;
  }
  return 0.0;
}

template <class T>
double select(std::span<const T> candidate, std::span<const T> reference, const Selector& sel) {
  return pick(score(candidate, reference, sel.variant, sel.beta), sel.measure);
}

Variant parse_variant(const std::string& text);
Measure parse_measure(const std::string& text);
std::string variant_name(Variant v);
std::string measure_name(Measure m);

}  // namespace swd::rouge
