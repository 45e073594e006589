#include "swd/weights.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "swd/errors.hpp"

namespace swd {

std::vector<double> sentence_scores(const Document& doc, std::span<const int> summary,
                                    const rouge::Selector& selector) {
  std::vector<double> e;
  e.reserve(doc.num_sentences());
  for (const auto& s : doc.sentences) {
    e.push_back(rouge::select(std::span<const int>(s), summary, selector));
  }
  return e;
}

WeightDistribution normalize_weights(std::span<const double> scores) {
  if (scores.empty()) throw ArgumentError("normalize_weights needs at least one score");
  const double hi = *std::max_element(scores.begin(), scores.end());
  WeightDistribution w;
  w.weights.reserve(scores.size());
  double total = 0.0;
  for (double e : scores) {
    w.weights.push_back(std::exp(e - hi));
    total += w.weights.back();
  }
  for (double& v : w.weights) v /= total;
  return w;
}

std::vector<WeightDistribution> estimate_corpus_weights(std::span<const EncodedPair> corpus,
                                                        const rouge::Selector& selector) {
  std::vector<WeightDistribution> out(corpus.size());
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = normalize_weights(sentence_scores(corpus[i].doc, corpus[i].summary, selector));
  }
  return out;
}

std::vector<WeightDistribution> estimate_corpus_weights_serial(std::span<const EncodedPair> corpus,
                                                               const rouge::Selector& selector) {
  std::vector<WeightDistribution> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) out.push_back(normalize_weights(sentence_scores(p.doc, p.summary, selector)));
  return out;
}

namespace {

void check_distribution(const WeightDistribution& w, std::size_t index) {
  double total = 0.0;
  for (double v : w.weights) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw FormatError("weights for pair " + std::to_string(index + 1) + " contain a non-positive entry");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw FormatError("weights for pair " + std::to_string(index + 1) + " sum to " + std::to_string(total));
  }
}

}  // namespace

void check_weights(std::span<const EncodedPair> corpus, std::span<const WeightDistribution> weights) {
  if (corpus.size() != weights.size()) {
    throw FormatError("weight sidecar has " + std::to_string(weights.size()) + " lines for " +
                      std::to_string(corpus.size()) + " pairs");
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (weights[i].size() != corpus[i].doc.num_sentences()) {
      throw FormatError("pair " + std::to_string(i + 1) + " has " +
                        std::to_string(corpus[i].doc.num_sentences()) + " sentences but " +
                        std::to_string(weights[i].size()) + " weights");
    }
    check_distribution(weights[i], i);
  }
}

void write_weights(const std::filesystem::path& path, std::span<const WeightDistribution> weights) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& w : weights) out << nlohmann::json(w.weights).dump() << '\n';
}

std::vector<WeightDistribution> read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<WeightDistribution> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_array() || j.empty()) throw FormatError("expected a non-empty array");
      WeightDistribution w;
      for (const auto& v : j) {
        if (!v.is_number()) throw FormatError("non-numeric weight");
        w.weights.push_back(v.get<double>());
      }
      check_distribution(w, out.size());
      out.push_back(std::move(w));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace swd
