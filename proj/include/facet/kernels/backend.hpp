#pragma once

#include <cstddef>

namespace facet::kernels {

// Numeric inner loops come in two flavors: a scalar reference and an AVX2
// variant. Selection happens once at runtime from CPU capabilities and can be
// overridden (tests pin one backend, the CLI exposes a flag).
//
// Equivalence contract between the variants:
//   * element-wise kernels (relu, axpy, add_bias, colsum, adamw_update,
//     warp_bilinear_row) produce bit-identical results: same IEEE ops per
//     element, no reassociation, no implicit FMA;
//   * reduction kernels (dot, sumsq_diff) and the matmul family may use FMA
//     and lane-split accumulators, so they agree to rounding error only.
// test_kernels asserts exactly this split.
enum class Backend { scalar, avx2 };

struct AdamWScalars {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double weight_decay;
  double bias_c1;  // 1 - beta1^t
  double bias_c2;  // 1 - beta2^t
};

struct KernelTable {
  // Row-major f64 linear algebra. c = a(m x k) * b(k x n).
  void (*matmul_f64)(const double* a, const double* b, double* c, int m, int k, int n);
  // c(m x n) = a(m x k) * b(n x k)^T.
  void (*matmul_nt_f64)(const double* a, const double* b, double* c, int m, int k, int n);
  // c(m x n) = a(k x m)^T * b(k x n).
  void (*matmul_tn_f64)(const double* a, const double* b, double* c, int m, int k, int n);
  void (*add_bias_f64)(double* y, const double* bias, int rows, int cols);
  void (*colsum_f64)(const double* a, double* out, int rows, int cols);
  void (*relu_f64)(const double* x, double* y, std::size_t n);
  void (*relu_backward_f64)(const double* x, const double* dy, double* dx, std::size_t n);
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
  double (*dot_f64)(const double* x, const double* y, std::size_t n);
  double (*sumsq_diff_f64)(const double* a, const double* b, std::size_t n);
  void (*adamw_update_f64)(double* p, double* m, double* v, const double* g, std::size_t n,
                           const AdamWScalars& s);

  // f32 inference path.
  void (*matmul_f32)(const float* a, const float* b, float* c, int m, int k, int n);
  void (*add_bias_f32)(float* y, const float* bias, int rows, int cols);
  void (*relu_f32)(const float* x, float* y, std::size_t n);
  // Bilinear resample of one output row from a single source plane.
  // Sample i reads src at (sx0 + i*dsx, sy0 + i*dsy); taps outside the plane
  // contribute zero.
  void (*warp_bilinear_row_f32)(const float* src, int src_w, int src_h, float sx0, float sy0,
                                float dsx, float dsy, float* dst, int n);
};

bool cpu_supports(Backend b);
Backend detect_best();
Backend active();
// Pins the backend. Throws facet::ConfigError for a backend this CPU lacks.
void force(Backend b);
void reset_to_auto();
const char* name(Backend b);
Backend parse_backend(const char* s);  // "scalar" | "avx2" | "auto" -> detect_best()

const KernelTable& table();  // table for the active backend
const KernelTable& table_for(Backend b);

}  // namespace facet::kernels
