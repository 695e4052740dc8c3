#include "stableik/linalg.hpp"

#include <algorithm>
#include <atomic>

#include "stableik/errors.hpp"

#if defined(__GNUC__) || defined(__clang__)
#define STABLEIK_NOINLINE [[gnu::noinline]]
#else
#define STABLEIK_NOINLINE
#endif

namespace stableik::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Work below this many multiply-adds is not worth a parallel region.
constexpr std::size_t kParallelThreshold = 1 << 14;

// One output row per call. noinline keeps a single code path shared by the
// serial and parallel drivers, which is what makes them bit-identical.

// crow[j] = sum_k arow[k] * b[k, j]; accumulation strictly in k order.
STABLEIK_NOINLINE void nn_row(const double* arow, const double* b, double* crow,
                              int k_dim, int n) {
  std::fill(crow, crow + n, 0.0);
  for (int k = 0; k < k_dim; ++k) {
    const double aik = arow[k];
    const double* brow = b + static_cast<std::size_t>(k) * n;
    for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
  }
}

// crow[j] = sum_m a[m, i] * b[m, j]; accumulation strictly in m order.
STABLEIK_NOINLINE void tn_row(const double* a_col, int lda, const double* b,
                              double* crow, int m_dim, int n) {
  std::fill(crow, crow + n, 0.0);
  for (int m = 0; m < m_dim; ++m) {
    const double w = a_col[static_cast<std::size_t>(m) * lda];
    const double* brow = b + static_cast<std::size_t>(m) * n;
    for (int j = 0; j < n; ++j) crow[j] += w * brow[j];
  }
}

// crow[j] = dot(arow, b[j, :]).
STABLEIK_NOINLINE void nt_row(const double* arow, const double* b, double* crow,
                              int k_dim, int n) {
  for (int j = 0; j < n; ++j) {
    const double* brow = b + static_cast<std::size_t>(j) * k_dim;
    double s = 0.0;
    for (int k = 0; k < k_dim; ++k) s += arow[k] * brow[k];
    crow[j] = s;
  }
}

void check_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols())
    throw ShapeError("gemm_nn: incompatible shapes");
}

void check_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols())
    throw ShapeError("gemm_tn: incompatible shapes");
}

void check_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows())
    throw ShapeError("gemm_nt: incompatible shapes");
}

std::size_t work(const Matrix& c, int inner) {
  return c.size() * static_cast<std::size_t>(inner);
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

void gemm_nn_serial(const Matrix& a, const Matrix& b, Matrix& c) {
  check_nn(a, b, c);
  for (int i = 0; i < c.rows(); ++i)
    nn_row(a.row(i), b.data(), c.row(i), a.cols(), c.cols());
}

void gemm_nn_parallel(const Matrix& a, const Matrix& b, Matrix& c) {
  check_nn(a, b, c);
  const int rows = c.rows();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    nn_row(a.row(i), b.data(), c.row(i), a.cols(), c.cols());
}

void gemm_tn_serial(const Matrix& a, const Matrix& b, Matrix& c) {
  check_tn(a, b, c);
  for (int i = 0; i < c.rows(); ++i)
    tn_row(a.data() + i, a.cols(), b.data(), c.row(i), a.rows(), c.cols());
}

void gemm_tn_parallel(const Matrix& a, const Matrix& b, Matrix& c) {
  check_tn(a, b, c);
  const int rows = c.rows();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    tn_row(a.data() + i, a.cols(), b.data(), c.row(i), a.rows(), c.cols());
}

void gemm_nt_serial(const Matrix& a, const Matrix& b, Matrix& c) {
  check_nt(a, b, c);
  for (int i = 0; i < c.rows(); ++i)
    nt_row(a.row(i), b.data(), c.row(i), a.cols(), c.cols());
}

void gemm_nt_parallel(const Matrix& a, const Matrix& b, Matrix& c) {
  check_nt(a, b, c);
  const int rows = c.rows();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    nt_row(a.row(i), b.data(), c.row(i), a.cols(), c.cols());
}

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  if (parallel_enabled() && work(c, a.cols()) >= kParallelThreshold)
    gemm_nn_parallel(a, b, c);
  else
    gemm_nn_serial(a, b, c);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  if (parallel_enabled() && work(c, a.rows()) >= kParallelThreshold)
    gemm_tn_parallel(a, b, c);
  else
    gemm_tn_serial(a, b, c);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  if (parallel_enabled() && work(c, a.cols()) >= kParallelThreshold)
    gemm_nt_parallel(a, b, c);
  else
    gemm_nt_serial(a, b, c);
}

}  // namespace stableik::kernels
