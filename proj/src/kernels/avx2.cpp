// AVX2/FMA kernel variants. Compiled with -mavx2 -mfma in its own TU and only
// reachable through the dispatch table after a CPU capability check.
//
// Element-wise kernels mirror the scalar reference op-for-op (mul/add only,
// no FMA) and must match it bit for bit. The matmul family and the scalar
// reductions use FMA and lane accumulators, so they match to rounding error.

#include "facet/kernels/backend.hpp"

#if defined(__x86_64__) || defined(__i386__) || defined(_M_X64)
#define FACET_KERNELS_X86 1
#endif

#ifdef FACET_KERNELS_X86

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace facet::kernels {
namespace {

inline double hsum_pd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

void matmul_f64_avx2(const double* a, const double* b, double* c, int m, int k, int n) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const __m256d av = _mm256_set1_pd(arow[l]);
      const double* brow = b + static_cast<std::size_t>(l) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      const double avs = arow[l];
      for (; j < n; ++j) crow[j] += avs * brow[j];
    }
  }
}

void matmul_nt_f64_avx2(const double* a, const double* b, double* c, int m, int k, int n) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      __m256d acc = _mm256_setzero_pd();
      int l = 0;
      for (; l < k4; l += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + l), _mm256_loadu_pd(brow + l), acc);
      }
      double sum = hsum_pd(acc);
      for (; l < k; ++l) sum += arow[l] * brow[l];
      crow[j] = sum;
    }
  }
}

void matmul_tn_f64_avx2(const double* a, const double* b, double* c, int m, int k, int n) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    for (int l = 0; l < k; ++l) {
      const double avs = a[static_cast<std::size_t>(l) * m + i];
      const __m256d av = _mm256_set1_pd(avs);
      const double* brow = b + static_cast<std::size_t>(l) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += avs * brow[j];
    }
  }
}

void add_bias_f64_avx2(double* y, const double* bias, int rows, int cols) {
  const int c4 = cols & ~3;
  for (int r = 0; r < rows; ++r) {
    double* yrow = y + static_cast<std::size_t>(r) * cols;
    int c = 0;
    for (; c < c4; c += 4) {
      _mm256_storeu_pd(yrow + c,
                       _mm256_add_pd(_mm256_loadu_pd(yrow + c), _mm256_loadu_pd(bias + c)));
    }
    for (; c < cols; ++c) yrow[c] += bias[c];
  }
}

void colsum_f64_avx2(const double* a, double* out, int rows, int cols) {
  for (int c = 0; c < cols; ++c) out[c] = 0.0;
  const int c4 = cols & ~3;
  for (int r = 0; r < rows; ++r) {
    const double* arow = a + static_cast<std::size_t>(r) * cols;
    int c = 0;
    for (; c < c4; c += 4) {
      _mm256_storeu_pd(out + c, _mm256_add_pd(_mm256_loadu_pd(out + c), _mm256_loadu_pd(arow + c)));
    }
    for (; c < cols; ++c) out[c] += arow[c];
  }
}

void relu_f64_avx2(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // max(x, 0) with x as first operand matches the scalar x > 0 ? x : 0,
    // including -0.0 and NaN handling.
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_f64_avx2(const double* x, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void axpy_f64_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_f64_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  double sum = hsum_pd(acc);
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

double sumsq_diff_f64_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double sum = hsum_pd(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void adamw_update_f64_avx2(double* p, double* m, double* v, const double* g, std::size_t n,
                           const AdamWScalars& s) {
  const __m256d b1 = _mm256_set1_pd(s.beta1);
  const __m256d one_minus_b1 = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2);
  const __m256d one_minus_b2 = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d bc1 = _mm256_set1_pd(s.bias_c1);
  const __m256d bc2 = _mm256_set1_pd(s.bias_c2);
  const __m256d lr = _mm256_set1_pd(s.lr);
  const __m256d eps = _mm256_set1_pd(s.eps);
  const __m256d wd = _mm256_set1_pd(s.weight_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(one_minus_b1, gv));
    vv = _mm256_add_pd(_mm256_mul_pd(b2, vv), _mm256_mul_pd(one_minus_b2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(mv, bc1);
    const __m256d vhat = _mm256_div_pd(vv, bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), eps);
    __m256d pv = _mm256_loadu_pd(p + i);
    const __m256d step = _mm256_add_pd(_mm256_div_pd(mhat, denom), _mm256_mul_pd(wd, pv));
    pv = _mm256_sub_pd(pv, _mm256_mul_pd(lr, step));
    _mm256_storeu_pd(p + i, pv);
  }
  for (; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * (g[i] * g[i]);
    const double mhat = m[i] / s.bias_c1;
    const double vhat = v[i] / s.bias_c2;
    p[i] = p[i] - s.lr * (mhat / (std::sqrt(vhat) + s.eps) + s.weight_decay * p[i]);
  }
}

void matmul_f32_avx2(const float* a, const float* b, float* c, int m, int k, int n) {
  const int n8 = n & ~7;
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const __m256 av = _mm256_set1_ps(arow[l]);
      const float* brow = b + static_cast<std::size_t>(l) * n;
      int j = 0;
      for (; j < n8; j += 8) {
        __m256 cv = _mm256_loadu_ps(crow + j);
        cv = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j), cv);
        _mm256_storeu_ps(crow + j, cv);
      }
      const float avs = arow[l];
      for (; j < n; ++j) crow[j] += avs * brow[j];
    }
  }
}

void add_bias_f32_avx2(float* y, const float* bias, int rows, int cols) {
  const int c8 = cols & ~7;
  for (int r = 0; r < rows; ++r) {
    float* yrow = y + static_cast<std::size_t>(r) * cols;
    int c = 0;
    for (; c < c8; c += 8) {
      _mm256_storeu_ps(yrow + c,
                       _mm256_add_ps(_mm256_loadu_ps(yrow + c), _mm256_loadu_ps(bias + c)));
    }
    for (; c < cols; ++c) yrow[c] += bias[c];
  }
}

void relu_f32_avx2(const float* x, float* y, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

inline float warp_sample_scalar(const float* src, int src_w, int src_h, float sx, float sy) {
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
  return top * (1.0f - wy) + bot * wy;
}

void warp_bilinear_row_f32_avx2(const float* src, int src_w, int src_h, float sx0, float sy0,
                                float dsx, float dsy, float* dst, int n) {
  const __m256 lane = _mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256 vsx0 = _mm256_set1_ps(sx0);
  const __m256 vsy0 = _mm256_set1_ps(sy0);
  const __m256 vdsx = _mm256_set1_ps(dsx);
  const __m256 vdsy = _mm256_set1_ps(dsy);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();
  const __m256i vw = _mm256_set1_epi32(src_w);
  const __m256i vh = _mm256_set1_epi32(src_h);
  const __m256i izero = _mm256_setzero_si256();
  const __m256i max_off = _mm256_set1_epi32(src_w * src_h - 1);

  const auto gather_tap = [&](__m256i xi, __m256i yi) -> __m256 {
    const __m256i x_ok = _mm256_and_si256(_mm256_cmpgt_epi32(vw, xi),
                                          _mm256_cmpgt_epi32(xi, _mm256_set1_epi32(-1)));
    const __m256i y_ok = _mm256_and_si256(_mm256_cmpgt_epi32(vh, yi),
                                          _mm256_cmpgt_epi32(yi, _mm256_set1_epi32(-1)));
    const __m256i ok = _mm256_and_si256(x_ok, y_ok);
    __m256i off = _mm256_add_epi32(_mm256_mullo_epi32(yi, vw), xi);
    off = _mm256_min_epi32(_mm256_max_epi32(off, izero), max_off);
    return _mm256_mask_i32gather_ps(zero, src, off, _mm256_castsi256_ps(ok), 4);
  };

  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 idx = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(i)), lane);
    // Same mul-then-add sequence as the scalar kernel; keep it FMA-free.
    __m256 sx = _mm256_add_ps(vsx0, _mm256_mul_ps(idx, vdsx));
    __m256 sy = _mm256_add_ps(vsy0, _mm256_mul_ps(idx, vdsy));
    const __m256 cmax = _mm256_set1_ps(2e9f);
    const __m256 cmin = _mm256_set1_ps(-2e9f);
    sx = _mm256_min_ps(_mm256_max_ps(sx, cmin), cmax);
    sy = _mm256_min_ps(_mm256_max_ps(sy, cmin), cmax);
    const __m256 fx = _mm256_floor_ps(sx);
    const __m256 fy = _mm256_floor_ps(sy);
    const __m256i x0 = _mm256_cvtps_epi32(fx);
    const __m256i y0 = _mm256_cvtps_epi32(fy);
    const __m256i x1 = _mm256_add_epi32(x0, _mm256_set1_epi32(1));
    const __m256i y1 = _mm256_add_epi32(y0, _mm256_set1_epi32(1));
    const __m256 wx = _mm256_sub_ps(sx, fx);
    const __m256 wy = _mm256_sub_ps(sy, fy);
    const __m256 iwx = _mm256_sub_ps(one, wx);
    const __m256 iwy = _mm256_sub_ps(one, wy);
    const __m256 v00 = gather_tap(x0, y0);
    const __m256 v01 = gather_tap(x1, y0);
    const __m256 v10 = gather_tap(x0, y1);
    const __m256 v11 = gather_tap(x1, y1);
    const __m256 top = _mm256_add_ps(_mm256_mul_ps(v00, iwx), _mm256_mul_ps(v01, wx));
    const __m256 bot = _mm256_add_ps(_mm256_mul_ps(v10, iwx), _mm256_mul_ps(v11, wx));
    const __m256 out = _mm256_add_ps(_mm256_mul_ps(top, iwy), _mm256_mul_ps(bot, wy));
    _mm256_storeu_ps(dst + i, out);
  }
  for (; i < n; ++i) {
    const float sx = sx0 + static_cast<float>(i) * dsx;
    const float sy = sy0 + static_cast<float>(i) * dsy;
    dst[i] = warp_sample_scalar(src, src_w, src_h, sx, sy);
  }
}

}  // namespace

extern const KernelTable kAvx2Table = {
    matmul_f64_avx2,
    matmul_nt_f64_avx2,
    matmul_tn_f64_avx2,
    add_bias_f64_avx2,
    colsum_f64_avx2,
    relu_f64_avx2,
    relu_backward_f64_avx2,
    axpy_f64_avx2,
    dot_f64_avx2,
    sumsq_diff_f64_avx2,
    adamw_update_f64_avx2,
    matmul_f32_avx2,
    add_bias_f32_avx2,
    relu_f32_avx2,
    warp_bilinear_row_f32_avx2,
};

}  // namespace facet::kernels

#endif  // FACET_KERNELS_X86
