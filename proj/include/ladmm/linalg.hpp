#pragma once

// Dense row-major storage and the handful of kernels the solver needs.
// Every reduction runs in ascending index order so results do not depend on
// how callers partition the columns.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ladmm/error.hpp"

namespace ladmm {

using Vector = std::vector<double>;

template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Row-major nested initializer, e.g. {{1, 2}, {3, 4}}.
  BasicMatrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw SpecError("ragged matrix initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static BasicMatrix identity(std::size_t n, T scale = T{1}) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }

  BasicMatrix transposed() const {
    BasicMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  /// Copy of columns [first, first + count).
  BasicMatrix column_block(std::size_t first, std::size_t count) const {
    BasicMatrix b(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < count; ++c) b(r, c) = (*this)(r, first + c);
    return b;
  }

  BasicMatrix& operator*=(T s) noexcept {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) noexcept { return dot(a, a); }
inline double norm(std::span<const double> a) noexcept { return std::sqrt(squared_norm(a)); }

inline double distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) noexcept {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// out = M x
inline void multiply(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), x);
}

inline Vector multiply(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) throw SpecError("multiply: dimension mismatch");
  Vector out(m.rows());
  multiply(m, x, out);
  return out;
}

/// out = (columns [first, first + out.size()) of M)^T w
inline void multiply_transposed(const Matrix& m, std::span<const double> w, std::span<double> out,
                                std::size_t first = 0) {
  for (auto& v : out) v = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double wr = w[r];
    if (wr == 0.0) continue;
    const auto row = m.row(r).subspan(first, out.size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c] * wr;
  }
}

inline Vector multiply_transposed(const Matrix& m, std::span<const double> w) {
  if (w.size() != m.rows()) throw SpecError("multiply_transposed: dimension mismatch");
  Vector out(m.cols());
  multiply_transposed(m, w, out);
  return out;
}

/// M^T M
inline Matrix gram(const Matrix& m) {
  Matrix g(m.cols(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t i = 0; i < m.cols(); ++i) {
      if (row[i] == 0.0) continue;
      for (std::size_t j = i; j < m.cols(); ++j) g(i, j) += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i < m.cols(); ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  explicit CholeskyFactor(const Matrix& spd) : l_(spd.rows(), spd.cols()) {
    if (spd.rows() != spd.cols()) throw SpecError("Cholesky: matrix not square");
    const std::size_t n = spd.rows();
    for (std::size_t j = 0; j < n; ++j) {
      double d = spd(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > 0.0) || !std::isfinite(d))
        throw RankError("Cholesky: matrix not positive definite at pivot " + std::to_string(j));
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = spd(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / ljj;
      }
    }
  }

  std::size_t size() const noexcept { return l_.rows(); }

  /// Solves (L L^T) u = rhs in place.
  void solve_in_place(std::span<double> rhs) const {
    const std::size_t n = l_.rows();
    for (std::size_t i = 0; i < n; ++i) {
      double s = rhs[i];
      for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * rhs[k];
      rhs[i] = s / l_(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = rhs[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * rhs[k];
      rhs[ii] = s / l_(ii, ii);
    }
  }

  Vector solve(std::span<const double> rhs) const {
    if (rhs.size() != size()) throw SpecError("Cholesky solve: dimension mismatch");
    Vector u(rhs.begin(), rhs.end());
    solve_in_place(u);
    return u;
  }

 private:
  Matrix l_;
};

}  // namespace ladmm
