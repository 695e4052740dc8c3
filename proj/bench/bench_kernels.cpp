// Times the serial reference kernels against the OpenMP ones and verifies
// that both produce bit-identical output on every timed case.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <omp.h>

#include "stableik/linalg.hpp"
#include "stableik/rng.hpp"

namespace {

using stableik::Matrix;

void randomize(Matrix& m, stableik::Rng& rng) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-1.0, 1.0);
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

using KernelFn = void (*)(const Matrix&, const Matrix&, Matrix&);

double time_ms(KernelFn fn, const Matrix& a, const Matrix& b, Matrix& c,
               int reps) {
  fn(a, b, c);  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn(a, b, c);
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

struct Case {
  const char* name;
  KernelFn serial;
  KernelFn parallel;
};

}  // namespace

int main() {
  // Square operands keep all three transpose modes shape-compatible.
  const Case cases[] = {
      {"gemm_nn", stableik::kernels::gemm_nn_serial,
       stableik::kernels::gemm_nn_parallel},
      {"gemm_tn", stableik::kernels::gemm_tn_serial,
       stableik::kernels::gemm_tn_parallel},
      {"gemm_nt", stableik::kernels::gemm_nt_serial,
       stableik::kernels::gemm_nt_parallel},
  };
  const int sizes[] = {64, 128, 256, 512};

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-8s %6s %12s %12s %9s %9s\n", "kernel", "n", "serial[ms]",
              "omp[ms]", "speedup", "match");

  stableik::Rng rng(0x5eed);
  int mismatches = 0;
  for (const Case& k : cases) {
    for (int n : sizes) {
      Matrix a(n, n);
      Matrix b(n, n);
      randomize(a, rng);
      randomize(b, rng);
      Matrix c_serial(n, n);
      Matrix c_parallel(n, n);

      const int reps = n <= 128 ? 50 : 10;
      const double t_serial = time_ms(k.serial, a, b, c_serial, reps);
      const double t_parallel = time_ms(k.parallel, a, b, c_parallel, reps);
      const bool match = bitwise_equal(c_serial, c_parallel);
      if (!match) ++mismatches;

      std::printf("%-8s %6d %12.3f %12.3f %8.2fx %9s\n", k.name, n, t_serial,
                  t_parallel, t_serial / t_parallel, match ? "bitwise" : "DIFF");
    }
  }
  if (mismatches > 0) {
    std::printf("FAIL: %d kernel pair(s) diverged\n", mismatches);
    return 1;
  }
  return 0;
}
