#include "swd/kernels.hpp"

#include <omp.h>

namespace swd::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1u << 15;

inline void matmul_row(const double* a_row, const double* b, double* c_row, std::size_t k,
                       std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double s = a_row[p];
    if (s == 0.0) continue;
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += s * b_row[j];
  }
}

inline void matmul_nt_row(const double* a_row, const double* b, double* c_row, std::size_t n,
                          std::size_t k) {
  for (std::size_t q = 0; q < k; ++q) {
    const double* b_row = b + q * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += a_row[j] * b_row[j];
    c_row[q] += acc;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c_row, std::size_t m,
                          std::size_t k, std::size_t n, std::size_t col) {
  for (std::size_t r = 0; r < m; ++r) {
    const double s = a[r * k + col];
    if (s == 0.0) continue;
    const double* b_row = b + r * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += s * b_row[j];
  }
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    matmul_row(pa + i * k, pb, pc + i * n, k, n);
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t n, std::size_t k) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    matmul_nt_row(pa + i * n, pb, pc + i * k, n, k);
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    matmul_tn_row(pa, pb, pc + i * n, m, k, n, static_cast<std::size_t>(i));
  }
}

namespace serial {

// Textbook loops, one dot product per output element.

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t q = 0; q < k; ++q) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * b[q * n + j];
      c[i * k + q] += acc;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < m; ++r) acc += a[r * k + i] * b[r * n + j];
      c[i * n + j] += acc;
    }
  }
}

}  // namespace serial

}  // namespace swd::kernels
