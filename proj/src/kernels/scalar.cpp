// Scalar reference kernels. These define the semantics the AVX2 variants are
// tested against; keep them boring.

#include <cmath>
#include <cstddef>

#include "facet/kernels/backend.hpp"

namespace facet::kernels {
namespace {

void matmul_f64_scalar(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt_f64_scalar(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] = acc;
    }
  }
}

void matmul_tn_f64_scalar(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    for (int l = 0; l < k; ++l) {
      const double av = a[static_cast<std::size_t>(l) * m + i];
      const double* brow = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_bias_f64_scalar(double* y, const double* bias, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* yrow = y + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) yrow[c] += bias[c];
  }
}

void colsum_f64_scalar(const double* a, double* out, int rows, int cols) {
  for (int c = 0; c < cols; ++c) out[c] = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* arow = a + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) out[c] += arow[c];
  }
}

void relu_f64_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_f64_scalar(const double* x, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void axpy_f64_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_f64_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sumsq_diff_f64_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void adamw_update_f64_scalar(double* p, double* m, double* v, const double* g, std::size_t n,
                             const AdamWScalars& s) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * (g[i] * g[i]);
    const double mhat = m[i] / s.bias_c1;
    const double vhat = v[i] / s.bias_c2;
    p[i] = p[i] - s.lr * (mhat / (std::sqrt(vhat) + s.eps) + s.weight_decay * p[i]);
  }
}

void matmul_f32_scalar(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const float av = arow[l];
      const float* brow = b + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_bias_f32_scalar(float* y, const float* bias, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    float* yrow = y + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) yrow[c] += bias[c];
  }
}

void relu_f32_scalar(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void warp_bilinear_row_f32_scalar(const float* src, int src_w, int src_h, float sx0, float sy0,
                                  float dsx, float dsy, float* dst, int n) {
  for (int i = 0; i < n; ++i) {
    // Positions computed as sx0 + i*dsx (not incrementally) so the AVX2 lane
    // math lands on the same values. Coordinates are clamped far outside any
    // plausible plane to keep the int casts defined; clamped samples are out
    // of bounds either way and resolve to zero.
    float sx = sx0 + static_cast<float>(i) * dsx;
    float sy = sy0 + static_cast<float>(i) * dsy;
    sx = sx < -2e9f ? -2e9f : (sx > 2e9f ? 2e9f : sx);
    sy = sy < -2e9f ? -2e9f : (sy > 2e9f ? 2e9f : sy);
    const float fx = std::floor(sx);
    const float fy = std::floor(sy);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const float wx = sx - fx;
    const float wy = sy - fy;
    const auto tap = [&](int xx, int yy) -> float {
      if (xx < 0 || yy < 0 || xx >= src_w || yy >= src_h) return 0.0f;
      return src[static_cast<std::size_t>(yy) * src_w + xx];
    };
    const float v00 = tap(x0, y0);
    const float v01 = tap(x0 + 1, y0);
    const float v10 = tap(x0, y0 + 1);
    const float v11 = tap(x0 + 1, y0 + 1);
    const float top = v00 * (1.0f - wx) + v01 * wx;
    const float bot = v10 * (1.0f - wx) + v11 * wx;
    dst[i] = top * (1.0f - wy) + bot * wy;
  }
}

}  // namespace

extern const KernelTable kScalarTable = {
    matmul_f64_scalar,
    matmul_nt_f64_scalar,
    matmul_tn_f64_scalar,
    add_bias_f64_scalar,
    colsum_f64_scalar,
    relu_f64_scalar,
    relu_backward_f64_scalar,
    axpy_f64_scalar,
    dot_f64_scalar,
    sumsq_diff_f64_scalar,
    adamw_update_f64_scalar,
    matmul_f32_scalar,
    add_bias_f32_scalar,
    relu_f32_scalar,
    warp_bilinear_row_f32_scalar,
};

}  // namespace facet::kernels
