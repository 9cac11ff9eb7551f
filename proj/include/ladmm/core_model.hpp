#pragma once

// Problem description for
//
//   minimize   g(x, y) + sum_i f_i(x_i) + h(y)
//   subject to A_1 x_1 + ... + A_K x_K + B y = 0
//
// with g, h Lipschitz-differentiable and each f_i only required to have a
// computable proximal map. K = 1 is the two-block problem.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ladmm/error.hpp"
#include "ladmm/linalg.hpp"

namespace ladmm {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Differentiable term with a known gradient-Lipschitz modulus.
class SmoothOracle {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;

  SmoothOracle(std::size_t dim, ValueFn value, GradientFn gradient, double lipschitz)
      : dim_(dim), value_(std::move(value)), gradient_(std::move(gradient)), lipschitz_(lipschitz) {
    if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz))
      throw SpecError("SmoothOracle: Lipschitz constant must be finite and nonnegative");
    if (!value_ || !gradient_) throw SpecError("SmoothOracle: value and gradient are required");
  }

  /// The canonical g = 0 (value 0, gradient 0, constant 0).
  static SmoothOracle zero(std::size_t dim) {
    SmoothOracle o(
        dim, [](std::span<const double>) { return 0.0; },
        [](std::span<const double>, std::span<double> out) {
          for (auto& v : out) v = 0.0;
        },
        0.0);
    o.zero_ = true;
    return o;
  }

  /// scale * ||u - center||^2, gradient-Lipschitz with constant 2 * scale.
  static SmoothOracle squared_distance(Vector center, double scale = 1.0) {
    if (!(scale > 0.0)) throw SpecError("squared_distance: scale must be positive");
    const std::size_t dim = center.size();
    return SmoothOracle(
        dim,
        [center, scale](std::span<const double> u) {
          double s = 0.0;
          for (std::size_t i = 0; i < u.size(); ++i) {
            const double d = u[i] - center[i];
            s += d * d;
          }
          return scale * s;
        },
        [center, scale](std::span<const double> u, std::span<double> out) {
          for (std::size_t i = 0; i < u.size(); ++i) out[i] = 2.0 * scale * (u[i] - center[i]);
        },
        2.0 * scale);
  }

  std::size_t dim() const noexcept { return dim_; }
  bool is_zero() const noexcept { return zero_; }
  double lipschitz_constant() const noexcept { return lipschitz_; }

  double value(std::span<const double> u) const {
    if (u.size() != dim_) throw SpecError("SmoothOracle::value: dimension mismatch");
    return value_(u);
  }
  void gradient(std::span<const double> u, std::span<double> out) const {
    if (u.size() != dim_ || out.size() != dim_)
      throw SpecError("SmoothOracle::gradient: dimension mismatch");
    gradient_(u, out);
  }
  Vector gradient(std::span<const double> u) const {
    Vector out(dim_);
    gradient(u, out);
    return out;
  }

 private:
  std::size_t dim_;
  ValueFn value_;
  GradientFn gradient_;
  double lipschitz_;
  bool zero_ = false;
};

/// Possibly nonsmooth, possibly extended-valued term with a proximal map
///   prox(v, s) = argmin_t value(t) + ||t - v||^2 / (2 s).
class ProxOracle {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using ProxFn = std::function<void(std::span<const double>, double, std::span<double>)>;
  using TermFn = std::function<double(double)>;

  ProxOracle(std::size_t dim, ValueFn value, ProxFn prox)
      : dim_(dim), value_(std::move(value)), prox_(std::move(prox)) {
    if (!value_ || !prox_) throw SpecError("ProxOracle: value and prox are required");
  }

  static ProxOracle zero(std::size_t dim) {
    return ProxOracle(
        dim, [](std::span<const double>) { return 0.0; },
        [](std::span<const double> v, double, std::span<double> out) {
          std::copy(v.begin(), v.end(), out.begin());
        });
  }

  /// value(t) = sum_i term(t_i). Sums over separable blocks are accumulated
  /// coordinate by coordinate, so they do not depend on the block partition.
  static ProxOracle separable(std::size_t dim, TermFn term, ProxFn prox) {
    if (!term) throw SpecError("ProxOracle: term is required");
    ProxOracle o(
        dim,
        [term](std::span<const double> t) {
          double s = 0.0;
          for (double v : t) s += term(v);
          return s;
        },
        std::move(prox));
    o.term_ = std::move(term);
    return o;
  }

  std::size_t dim() const noexcept { return dim_; }
  bool is_separable() const noexcept { return static_cast<bool>(term_); }
  double term(double t) const { return term_(t); }

  double value(std::span<const double> t) const {
    if (t.size() != dim_) throw SpecError("ProxOracle::value: dimension mismatch");
    return value_(t);
  }

  void prox(std::span<const double> point, double step, std::span<double> out) const {
    if (point.size() != dim_ || out.size() != dim_)
      throw SpecError("ProxOracle::prox: dimension mismatch");
    if (!(step > 0.0)) throw SpecError("ProxOracle::prox: step must be positive");
    prox_(point, step, out);
  }
  Vector prox(std::span<const double> point, double step) const {
    Vector out(dim_);
    prox(point, step, out);
    return out;
  }

 private:
  std::size_t dim_;
  ValueFn value_;
  ProxFn prox_;
  TermFn term_;
};

/// Immutable problem data. A is kept as one n x p matrix; block i owns the
/// columns [block_offset(i), block_offset(i + 1)).
class ProblemSpec {
 public:
  ProblemSpec(SmoothOracle g, SmoothOracle h, std::vector<ProxOracle> f_blocks,
              const std::vector<Matrix>& a_blocks, Matrix b, bool coercive_attested)
      : g_(std::move(g)),
        h_(std::move(h)),
        f_(std::move(f_blocks)),
        b_(std::move(b)),
        coercive_attested_(coercive_attested) {
    if (a_blocks.empty()) throw SpecError("ProblemSpec: at least one x-block is required");
    if (a_blocks.size() != f_.size())
      throw SpecError("ProblemSpec: number of A blocks differs from number of f blocks");
    const std::size_t n = b_.rows();
    offsets_.push_back(0);
    for (std::size_t i = 0; i < a_blocks.size(); ++i) {
      if (a_blocks[i].rows() != n)
        throw SpecError("ProblemSpec: A block " + std::to_string(i) + " has " +
                        std::to_string(a_blocks[i].rows()) + " rows, B has " + std::to_string(n));
      if (a_blocks[i].cols() != f_[i].dim())
        throw SpecError("ProblemSpec: A block " + std::to_string(i) + " width differs from f block dimension");
      offsets_.push_back(offsets_.back() + a_blocks[i].cols());
    }
    a_ = Matrix(n, offsets_.back());
    for (std::size_t i = 0; i < a_blocks.size(); ++i)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < a_blocks[i].cols(); ++c) a_(r, offsets_[i] + c) = a_blocks[i](r, c);
    validate_oracles();
  }

  /// Convenience: split a concatenated A into blocks matching the f block sizes.
  static ProblemSpec from_stacked(SmoothOracle g, SmoothOracle h, std::vector<ProxOracle> f_blocks,
                                  const Matrix& a, Matrix b, bool coercive_attested) {
    std::vector<Matrix> blocks;
    std::size_t first = 0;
    for (const auto& f : f_blocks) {
      if (first + f.dim() > a.cols()) throw SpecError("ProblemSpec: f blocks exceed the columns of A");
      blocks.push_back(a.column_block(first, f.dim()));
      first += f.dim();
    }
    if (first != a.cols()) throw SpecError("ProblemSpec: f blocks do not cover the columns of A");
    return ProblemSpec(std::move(g), std::move(h), std::move(f_blocks), blocks, std::move(b),
                       coercive_attested);
  }

  std::size_t n() const noexcept { return b_.rows(); }
  std::size_t p() const noexcept { return a_.cols(); }
  std::size_t q() const noexcept { return b_.cols(); }
  std::size_t block_count() const noexcept { return f_.size(); }
  std::size_t block_offset(std::size_t i) const noexcept { return offsets_[i]; }
  std::size_t block_size(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  const SmoothOracle& g() const noexcept { return g_; }
  const SmoothOracle& h() const noexcept { return h_; }
  const ProxOracle& f(std::size_t i) const noexcept { return f_[i]; }
  const Matrix& A() const noexcept { return a_; }
  Matrix A_block(std::size_t i) const { return a_.column_block(offsets_[i], block_size(i)); }
  const Matrix& B() const noexcept { return b_; }
  bool coercive_attested() const noexcept { return coercive_attested_; }

  /// Objective contribution of x alone: sum_i f_i(x_i), +inf as soon as one block is +inf.
  double f_value(std::span<const double> x) const {
    double total = 0.0;
    for (std::size_t i = 0; i < f_.size(); ++i) {
      const auto block = x.subspan(offsets_[i], block_size(i));
      if (f_[i].is_separable()) {
        for (double t : block) total += f_[i].term(t);
      } else {
        const double v = f_[i].value(block);
        if (v == kInfinity) return kInfinity;
        total += v;
      }
    }
    return total;
  }

  double g_value(std::span<const double> x, std::span<const double> y) const {
    if (g_.is_zero()) return 0.0;
    return g_.value(concat(x, y));
  }

  /// Writes grad_x g(x, y) and grad_y g(x, y); either output may be empty to skip it.
  void g_gradient(std::span<const double> x, std::span<const double> y, std::span<double> grad_x,
                  std::span<double> grad_y) const {
    if (g_.is_zero()) {
      for (auto& v : grad_x) v = 0.0;
      for (auto& v : grad_y) v = 0.0;
      return;
    }
    const Vector full = g_.gradient(concat(x, y));
    std::copy(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(grad_x.size()), grad_x.begin());
    if (!grad_y.empty())
      std::copy(full.begin() + static_cast<std::ptrdiff_t>(p()), full.end(), grad_y.begin());
  }

  void check_dimensions(std::span<const double> x, std::span<const double> y) const {
    if (x.size() != p()) throw SpecError("x has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(p()));
    if (y.size() != q()) throw SpecError("y has dimension " + std::to_string(y.size()) + ", expected " + std::to_string(q()));
  }

 private:
  void validate_oracles() const {
    if (g_.dim() != p() + q()) throw SpecError("ProblemSpec: g must act on (x, y)");
    if (h_.dim() != q()) throw SpecError("ProblemSpec: h must act on y");
  }

  Vector concat(std::span<const double> x, std::span<const double> y) const {
    Vector z;
    z.reserve(x.size() + y.size());
    z.insert(z.end(), x.begin(), x.end());
    z.insert(z.end(), y.begin(), y.end());
    return z;
  }

  SmoothOracle g_;
  SmoothOracle h_;
  std::vector<ProxOracle> f_;
  Matrix a_;
  Matrix b_;
  std::vector<std::size_t> offsets_;
  bool coercive_attested_;
};

/// Current iterate plus one (y: two) cycles of history and cached products.
/// Before the first iteration the history slots hold copies of the initial point.
struct IterateState {
  Vector x, y, gamma;
  Vector x_prev, y_prev, y_prev2, gamma_prev;
  Vector Ax, By;
  Vector Ax_prev, By_prev;
  long iter = 0;

  static IterateState initial(const ProblemSpec& spec, Vector x0, Vector y0, Vector gamma0) {
    spec.check_dimensions(x0, y0);
    if (gamma0.size() != spec.n()) throw SpecError("gamma has wrong dimension");
    IterateState s;
    s.x = std::move(x0);
    s.y = std::move(y0);
    s.gamma = std::move(gamma0);
    s.refresh_cache(spec);
    s.x_prev = s.x;
    s.y_prev = s.y;
    s.y_prev2 = s.y;
    s.gamma_prev = s.gamma;
    s.Ax_prev = s.Ax;
    s.By_prev = s.By;
    return s;
  }

  static IterateState zeros(const ProblemSpec& spec) {
    return initial(spec, Vector(spec.p(), 0.0), Vector(spec.q(), 0.0), Vector(spec.n(), 0.0));
  }

  void refresh_cache(const ProblemSpec& spec) {
    Ax = multiply(spec.A(), x);
    By = multiply(spec.B(), y);
  }

  /// Shifts history and installs the next iterate.
  void advance(Vector x_next, Vector ax_next, Vector y_next, Vector by_next, Vector gamma_next) {
    x_prev = std::exchange(x, std::move(x_next));
    Ax_prev = std::exchange(Ax, std::move(ax_next));
    y_prev2 = std::exchange(y_prev, std::exchange(y, std::move(y_next)));
    By_prev = std::exchange(By, std::move(by_next));
    gamma_prev = std::exchange(gamma, std::move(gamma_next));
    ++iter;
  }

  /// Ax + By from the caches.
  Vector constraint_residual() const {
    Vector r(Ax.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = Ax[i] + By[i];
    return r;
  }
};

/// g(x, y) + sum_i f_i(x_i) + h(y); +inf if any f_i is +inf.
inline double evaluate_objective(const ProblemSpec& spec, std::span<const double> x,
                                 std::span<const double> y) {
  spec.check_dimensions(x, y);
  const double fx = spec.f_value(x);
  if (fx == kInfinity) return kInfinity;
  return spec.g_value(x, y) + fx + spec.h().value(y);
}

/// Augmented Lagrangian at an explicit point with precomputed Ax and By.
inline double evaluate_lagrangian(const ProblemSpec& spec, std::span<const double> x,
                                  std::span<const double> y, std::span<const double> gamma,
                                  std::span<const double> ax, std::span<const double> by, double beta) {
  if (!(beta > 0.0)) throw NumericError("augmented Lagrangian: beta must be positive");
  if (!all_finite(x) || !all_finite(y) || !all_finite(gamma))
    throw NumericError("augmented Lagrangian: non-finite iterate");
  const double obj = evaluate_objective(spec, x, y);
  if (obj == kInfinity) return kInfinity;
  double coupling = 0.0;
  double penalty = 0.0;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double r = ax[i] + by[i];
    coupling += gamma[i] * r;
    penalty += r * r;
  }
  return obj + coupling + 0.5 * beta * penalty;
}

/// L_beta(x, y, gamma) = objective + <gamma, Ax + By> + (beta / 2) ||Ax + By||^2 using the state's caches.
inline double evaluate_lagrangian(const ProblemSpec& spec, const IterateState& state, double beta) {
  return evaluate_lagrangian(spec, state.x, state.y, state.gamma, state.Ax, state.By, beta);
}

struct Residuals {
  double dx = 0.0;
  double dy = 0.0;
  double dgamma = 0.0;
  double feas = 0.0;

  friend bool operator==(const Residuals&, const Residuals&) = default;
};

inline Residuals residuals(const IterateState& state) {
  if (state.iter < 1) throw StateError("residuals: no iteration has completed");
  Residuals r;
  r.dx = distance(state.x, state.x_prev);
  r.dy = distance(state.y, state.y_prev);
  r.dgamma = distance(state.gamma, state.gamma_prev);
  double s = 0.0;
  for (std::size_t i = 0; i < state.Ax.size(); ++i) {
    const double v = state.Ax[i] + state.By[i];
    s += v * v;
  }
  r.feas = std::sqrt(s);
  return r;
}

}  // namespace ladmm
