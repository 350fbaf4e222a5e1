#pragma once

// Data-parallel f64 kernels behind the tensor ops. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2+FMA variant. The active
// table is picked once at runtime (cpuid, overridable via HVTRACK_KERNELS or
// kernels::select) so the same binary runs on machines without AVX2.
//
// All matrices are row-major, double precision.

#include <cstddef>

namespace hvt::kernels {

enum class Backend { scalar, avx2 };

struct Table {
  // C[MxN] = A[MxK] * B[KxN]            (accumulate: C += ...)
  void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c, bool accumulate);
  // C[MxN] = A[MxK] * B[NxK]^T
  void (*gemm_nt)(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c, bool accumulate);
  // C[MxN] = A[KxM]^T * B[KxN]
  void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c, bool accumulate);

  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);  // y += alpha*x
  void (*vadd)(std::size_t n, const double* x, const double* y, double* out);
  void (*vmul)(std::size_t n, const double* x, const double* y, double* out);
  void (*relu)(std::size_t n, const double* x, double* out);
  // dx += dy where x > 0
  void (*relu_grad)(std::size_t n, const double* x, const double* dy, double* dx);
  // out rows are softmax(x rows); numerically stabilised by the row max
  void (*row_softmax)(std::size_t rows, std::size_t cols, const double* x, double* out);
  // d[i*m + j] = squared euclidean distance between a[i] and b[j], 3-d points
  void (*pairwise_sqdist)(std::size_t n, std::size_t m,
                          const double* a, const double* b, double* d);
  double (*reduce_sum)(std::size_t n, const double* x);
  double (*dot)(std::size_t n, const double* x, const double* y);
  void (*min_update)(std::size_t n, const double* cand, double* mind);
  // index of the first element attaining the maximum
  std::size_t (*argmax)(std::size_t n, const double* x);

  const char* name;
};

const Table& active();
void select(Backend b);              // force a backend (tests, HVTRACK_KERNELS env)
const Table& table_for(Backend b);   // access a specific backend directly
bool avx2_supported();

extern const Table scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const Table avx2_table;
#endif

}  // namespace hvt::kernels
