// AVX2+FMA variants of the f64 kernels. This translation unit is compiled
// with -mavx2 -mfma; it is only ever entered through the dispatch table after
// a cpuid check, so the rest of the binary stays baseline.

#include "hvtrack/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace hvt::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + kk * n;
      const __m256d avv = _mm256_set1_pd(av);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      __m256d acc = _mm256_setzero_pd();
      std::size_t kk = 0;
      for (; kk + 4 <= k; kk += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + kk),
                              _mm256_loadu_pd(brow + kk), acc);
      double s = hsum(acc);
      for (; kk < k; ++kk) s += arow[kk] * brow[kk];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = a + kk * m;
    const double* brow = b + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      const __m256d avv = _mm256_set1_pd(av);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void vadd(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void vmul(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void relu(std::size_t n, const double* x, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad(std::size_t n, const double* x, const double* dy, double* dx) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gv));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

void row_softmax(std::size_t rows, std::size_t cols, const double* x, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = out + r * cols;
    double mx = xr[0];
    {
      std::size_t j = 1;
      if (cols >= 4) {
        __m256d mv = _mm256_loadu_pd(xr);
        for (j = 4; j + 4 <= cols; j += 4)
          mv = _mm256_max_pd(mv, _mm256_loadu_pd(xr + j));
        alignas(32) double tmp[4];
        _mm256_store_pd(tmp, mv);
        mx = std::max(std::max(tmp[0], tmp[1]), std::max(tmp[2], tmp[3]));
      }
      for (; j < cols; ++j) mx = std::max(mx, xr[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const __m256d inv = _mm256_set1_pd(1.0 / sum);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(yr + j, _mm256_mul_pd(_mm256_loadu_pd(yr + j), inv));
    for (; j < cols; ++j) yr[j] *= 1.0 / sum;
  }
}

void pairwise_sqdist(std::size_t n, std::size_t m,
                     const double* a, const double* b, double* d) {
  // repack b into xyz planes so the inner loop streams contiguously
  std::vector<double> bx(m), by(m), bz(m);
  for (std::size_t j = 0; j < m; ++j) {
    bx[j] = b[j * 3 + 0];
    by[j] = b[j * 3 + 1];
    bz[j] = b[j * 3 + 2];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const __m256d ax = _mm256_set1_pd(a[i * 3 + 0]);
    const __m256d ay = _mm256_set1_pd(a[i * 3 + 1]);
    const __m256d az = _mm256_set1_pd(a[i * 3 + 2]);
    double* drow = d + i * m;
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
      __m256d dx = _mm256_sub_pd(ax, _mm256_loadu_pd(bx.data() + j));
      __m256d dy = _mm256_sub_pd(ay, _mm256_loadu_pd(by.data() + j));
      __m256d dz = _mm256_sub_pd(az, _mm256_loadu_pd(bz.data() + j));
      __m256d acc = _mm256_mul_pd(dx, dx);
      acc = _mm256_fmadd_pd(dy, dy, acc);
      acc = _mm256_fmadd_pd(dz, dz, acc);
      _mm256_storeu_pd(drow + j, acc);
    }
    for (; j < m; ++j) {
      const double dx = a[i * 3 + 0] - bx[j];
      const double dy = a[i * 3 + 1] - by[j];
      const double dz = a[i * 3 + 2] - bz[j];
      drow[j] = dx * dx + dy * dy + dz * dz;
    }
  }
}

double reduce_sum(std::size_t n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void min_update(std::size_t n, const double* cand, double* mind) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(mind + i, _mm256_min_pd(_mm256_loadu_pd(mind + i),
                                             _mm256_loadu_pd(cand + i)));
  for (; i < n; ++i)
    if (cand[i] < mind[i]) mind[i] = cand[i];
}

std::size_t argmax(std::size_t n, const double* x) {
  // vector max, then scan for the first element equal to it; keeps the
  // smallest-index tie-break of the scalar kernel
  double mx = x[0];
  std::size_t i = 1;
  if (n >= 4) {
    __m256d mv = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
    alignas(32) double tmp[4];
    _mm256_store_pd(tmp, mv);
    mx = std::max(std::max(tmp[0], tmp[1]), std::max(tmp[2], tmp[3]));
  }
  for (; i < n; ++i) mx = std::max(mx, x[i]);
  for (std::size_t j = 0; j < n; ++j)
    if (x[j] == mx) return j;
  return 0;
}

}  // namespace

const Table avx2_table = {
    gemm_nn, gemm_nt, gemm_tn, axpy,        vadd,       vmul,
    relu,    relu_grad, row_softmax, pairwise_sqdist, reduce_sum, dot,
    min_update, argmax, "avx2",
};

}  // namespace hvt::kernels

#endif  // x86-64
