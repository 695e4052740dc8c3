#ifndef STABLEIK_LINALG_HPP_
#define STABLEIK_LINALG_HPP_

#include <cstddef>
#include <vector>

namespace stableik {

/// Dense row-major matrix of doubles. Batches are stored one sample per row.
class Matrix {
public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  double* row(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const {
    return data_.data() + static_cast<std::size_t>(i) * cols_;
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

private:
  int rows_;
  int cols_;
  std::vector<double> data_;
};

/// Matrix product kernels. Each kernel exists in a serial reference form and
/// an OpenMP form parallelized over output rows. Every output element is
/// accumulated by exactly one thread in a fixed index order, so the two forms
/// produce bit-identical results; tests assert that equality and the bench
/// target times them against each other.
namespace kernels {

bool parallel_enabled();
void set_parallel(bool on);

// c = a * b
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c);
// c = a^T * b
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c);
// c = a * b^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c);

void gemm_nn_serial(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_tn_serial(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_nt_serial(const Matrix& a, const Matrix& b, Matrix& c);

void gemm_nn_parallel(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_tn_parallel(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_nt_parallel(const Matrix& a, const Matrix& b, Matrix& c);

}  // namespace kernels

}  // namespace stableik

#endif  // STABLEIK_LINALG_HPP_
