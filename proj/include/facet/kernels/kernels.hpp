#pragma once

#include "facet/kernels/backend.hpp"

// Thin dispatch wrappers so call sites read like plain functions.
namespace facet::kernels {

inline void matmul_f64(const double* a, const double* b, double* c, int m, int k, int n) {
  table().matmul_f64(a, b, c, m, k, n);
}
inline void matmul_nt_f64(const double* a, const double* b, double* c, int m, int k, int n) {
  table().matmul_nt_f64(a, b, c, m, k, n);
}
inline void matmul_tn_f64(const double* a, const double* b, double* c, int m, int k, int n) {
  table().matmul_tn_f64(a, b, c, m, k, n);
}
inline void add_bias_f64(double* y, const double* bias, int rows, int cols) {
  table().add_bias_f64(y, bias, rows, cols);
}
inline void colsum_f64(const double* a, double* out, int rows, int cols) {
  table().colsum_f64(a, out, rows, cols);
}
inline void relu_f64(const double* x, double* y, std::size_t n) { table().relu_f64(x, y, n); }
inline void relu_backward_f64(const double* x, const double* dy, double* dx, std::size_t n) {
  table().relu_backward_f64(x, dy, dx, n);
}
inline void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  table().axpy_f64(alpha, x, y, n);
}
inline double dot_f64(const double* x, const double* y, std::size_t n) {
  return table().dot_f64(x, y, n);
}
inline double sumsq_diff_f64(const double* a, const double* b, std::size_t n) {
  return table().sumsq_diff_f64(a, b, n);
}
inline void adamw_update_f64(double* p, double* m, double* v, const double* g, std::size_t n,
                             const AdamWScalars& s) {
  table().adamw_update_f64(p, m, v, g, n, s);
}

inline void matmul_f32(const float* a, const float* b, float* c, int m, int k, int n) {
  table().matmul_f32(a, b, c, m, k, n);
}
inline void add_bias_f32(float* y, const float* bias, int rows, int cols) {
  table().add_bias_f32(y, bias, rows, cols);
}
inline void relu_f32(const float* x, float* y, std::size_t n) { table().relu_f32(x, y, n); }
inline void warp_bilinear_row_f32(const float* src, int src_w, int src_h, float sx0, float sy0,
                                  float dsx, float dsy, float* dst, int n) {
  table().warp_bilinear_row_f32(src, src_w, src_h, sx0, sy0, dsx, dsy, dst, n);
}

}  // namespace facet::kernels
