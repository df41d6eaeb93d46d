// Dense row-major matrix and the handful of products the training loops need.
// matmul may split work across threads, but every output element is computed
// by exactly one thread in a fixed order, so results do not depend on the
// thread count.
#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lw {

class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("Matrix: data length != rows*cols");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_)
        throw std::invalid_argument("Matrix: ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Training inputs reject NaN/Inf up front; intermediate buffers are not checked.
  void require_finite(const std::string& what) const {
    if (!all_finite())
      throw std::invalid_argument(what + ": non-finite entry");
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

namespace detail {
inline void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace detail

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::check(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(m, n);
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      if (av == 0.0) continue;
      const double* bk = b.row(kk);
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
  return c;
}

// C = A^T * B  (A is m x k, B is m x n, result k x n)
inline Matrix matmul_tA(const Matrix& a, const Matrix& b) {
  detail::check(a.rows() == b.rows(), "matmul_tA: row count mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(k, n);
#pragma omp parallel if (m * k * n > 65536)
  {
#ifdef _OPENMP
    const int nt = omp_get_num_threads(), tid = omp_get_thread_num();
#else
    const int nt = 1, tid = 0;
#endif
    const std::size_t lo = k * tid / nt, hi = k * (tid + 1) / nt;
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a.row(i);
      const double* bi = b.row(i);
      for (std::size_t kk = lo; kk < hi; ++kk) {
        const double av = ai[kk];
        if (av == 0.0) continue;
        double* ck = c.row(kk);
        for (std::size_t j = 0; j < n; ++j) ck[j] += av * bi[j];
      }
    }
  }
  return c;
}

// C = A * B^T  (A is m x k, B is n x k, result m x n)
inline Matrix matmul_tB(const Matrix& a, const Matrix& b) {
  detail::check(a.cols() == b.cols(), "matmul_tB: column count mismatch");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix c(m, n);
#pragma omp parallel for schedule(static) if (m * k * n > 65536)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
      ci[j] = s;
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

inline void axpy_inplace(Matrix& a, double s, const Matrix& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "axpy: shape mismatch");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

inline void scale_inplace(Matrix& a, double s) {
  double* pa = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] *= s;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "subtract: shape mismatch");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
  return c;
}

// Adds the length-n row vector v to every row of a.
inline void add_rowvec_inplace(Matrix& a, const Matrix& v) {
  detail::check(v.rows() == 1 && v.cols() == a.cols(), "add_rowvec: shape mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ai = a.row(i);
    const double* pv = v.row(0);
    for (std::size_t j = 0; j < a.cols(); ++j) ai[j] += pv[j];
  }
}

inline Matrix colsum(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s(0, j) += ai[j];
  }
  return s;
}

inline Matrix gather_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
  Matrix g(idx.size(), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    detail::check(idx[i] < a.rows(), "gather_rows: index out of range");
    const double* src = a.row(idx[i]);
    double* dst = g.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) dst[j] = src[j];
  }
  return g;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::fabs(a.data()[i]));
  return s;
}

}  // namespace lw
