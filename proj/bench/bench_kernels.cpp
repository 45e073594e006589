// Parallel kernels against their serial references.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "swd/kernels.hpp"
#include "swd/synth.hpp"
#include "swd/weights.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

BENCHMARK(bm_matmul<swd::kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<swd::kernels::matmul>)->Name("matmul/omp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<swd::kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<swd::kernels::matmul_nt>)->Name("matmul_nt/omp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<swd::kernels::serial::matmul_tn>)->Name("matmul_tn/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<swd::kernels::matmul_tn>)->Name("matmul_tn/omp")->RangeMultiplier(2)->Range(32, 256);

std::vector<swd::EncodedPair> bench_corpus() {
  swd::SynthSpec spec;
  spec.pairs = 2000;
  spec.sentences = 10;
  spec.sentence_length = 30;
  spec.noise_overlap = 0.2;
  const auto data = swd::generate(spec);
  const swd::CorpusOptions opts;
  const swd::Vocab vocab = swd::build_vocab(data.pairs, opts);
  return swd::encode_corpus(data.pairs, vocab, opts);
}

template <bool Parallel>
void bm_weights(benchmark::State& state) {
  static const auto corpus = bench_corpus();
  for (auto _ : state) {
    auto w = Parallel ? swd::estimate_corpus_weights(corpus) : swd::estimate_corpus_weights_serial(corpus);
    benchmark::DoNotOptimize(w.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus.size()));
}

BENCHMARK(bm_weights<false>)->Name("estimate_weights/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_weights<true>)->Name("estimate_weights/omp")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
