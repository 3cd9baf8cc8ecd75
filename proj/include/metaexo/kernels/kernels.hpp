#pragma once

#include <cstddef>

namespace metaexo::kernels {

// Dense float64 inner loops used by the tensor layer. Two implementations
// exist: a portable scalar one and an AVX2+FMA one selected at runtime.
// Elementwise ops (add..axpy) must produce bit-identical results across
// implementations; reductions (dot, matmul) may differ by accumulation
// order and are compared under a tolerance instead.
//
// All pointers are non-aliasing except axpy, where y is read and written.
// matmul computes C = A * B with A (m x k), B (k x n), C (m x n), all
// row-major; C must not alias A or B.
struct KernelTable {
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*div)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  void (*shift)(const double* a, double s, double* out, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*matmul)(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n);
};

const KernelTable& scalar_table();

// Returns nullptr when the build does not target x86-64.
const KernelTable* avx2_table();

// True when the AVX2 table exists and the CPU reports avx2+fma.
bool avx2_runtime_supported();

// Runtime selection: AVX2 when the CPU supports avx2+fma, scalar otherwise.
// METAEXO_KERNEL=scalar|avx2 forces a choice (throws ConfigError if the
// forced choice is unavailable). The decision is made once per process.
const KernelTable& active();
const char* active_name();

}  // namespace metaexo::kernels
