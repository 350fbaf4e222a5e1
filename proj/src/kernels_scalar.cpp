#include "hvtrack/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hvt::kernels {
namespace {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
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
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] = accumulate ? crow[j] + acc : acc;
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
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vadd(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void vmul(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void relu(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad(std::size_t n, const double* x, const double* dy, double* dx) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

void row_softmax(std::size_t rows, std::size_t cols, const double* x, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = out + r * cols;
    double mx = xr[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
  }
}

void pairwise_sqdist(std::size_t n, std::size_t m,
                     const double* a, const double* b, double* d) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ax = a[i * 3 + 0], ay = a[i * 3 + 1], az = a[i * 3 + 2];
    double* drow = d + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double dx = ax - b[j * 3 + 0];
      const double dy = ay - b[j * 3 + 1];
      const double dz = az - b[j * 3 + 2];
      drow[j] = dx * dx + dy * dy + dz * dz;
    }
  }
}

double reduce_sum(std::size_t n, const double* x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double dot(std::size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void min_update(std::size_t n, const double* cand, double* mind) {
  for (std::size_t i = 0; i < n; ++i)
    if (cand[i] < mind[i]) mind[i] = cand[i];
}

std::size_t argmax(std::size_t n, const double* x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

}  // namespace

const Table scalar_table = {
    gemm_nn, gemm_nt, gemm_tn, axpy,        vadd,       vmul,
    relu,    relu_grad, row_softmax, pairwise_sqdist, reduce_sum, dot,
    min_update, argmax, "scalar",
};

}  // namespace hvt::kernels
