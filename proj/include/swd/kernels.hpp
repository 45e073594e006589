#pragma once

#include <cstddef>
#include <span>

// Dense row-major matrix kernels used by the autodiff engine.
//
// Every kernel accumulates into its output (C += ...). The OpenMP versions
// split work over output rows only; each output element is computed by one
// thread in a fixed operation order, so results do not depend on the thread
// count. The serial:: versions are naive one-dot-product-per-element loops
// kept as a test oracle and benchmark baseline.
namespace swd::kernels {

// C[m x n] += A[m x k] * B[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

// C[m x k] += A[m x n] * B[k x n]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t n, std::size_t k);

// C[k x n] += A[m x k]^T * B[m x n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

int max_threads();

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t n, std::size_t k);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

}  // namespace serial

}  // namespace swd::kernels
