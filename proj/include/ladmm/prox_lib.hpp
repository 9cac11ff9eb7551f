#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ladmm/core_model.hpp"
#include "ladmm/error.hpp"

namespace ladmm {

/// Clipped quadratic sparsity penalty, per coordinate
///   lambda * (|t| - eta t^2)   for |t| <= 1 / (2 eta)
///   lambda / (4 eta)           otherwise.
/// Continuous, even, nonnegative and zero only at t = 0.
struct ClippedQuadPenalty {
  double lambda = 0.1;
  double eta = 0.1;

  double breakpoint() const noexcept { return 0.5 / eta; }

  /// Unweighted shape F(t).
  template <std::floating_point T>
  static T shape(T t, T eta) noexcept {
    const T a = std::abs(t);
    if (a <= T(0.5) / eta) return a - eta * t * t;
    return T(0.25) / eta;
  }

  double value(double t) const noexcept { return lambda * shape(t, eta); }

  double value(std::span<const double> t) const noexcept {
    double s = 0.0;
    for (double v : t) s += shape(v, eta);
    return lambda * s;
  }
};

/// Indicator of M^N for a finite set M of scalars.
struct FiniteSetIndicator {
  std::vector<double> elements;  // sorted ascending, nonempty

  explicit FiniteSetIndicator(std::vector<double> m) : elements(std::move(m)) {
    if (elements.empty()) throw SpecError("FiniteSetIndicator: the set must be nonempty");
    std::sort(elements.begin(), elements.end());
    elements.erase(std::unique(elements.begin(), elements.end()), elements.end());
  }

  /// {lo, lo + 1, ..., hi}
  static FiniteSetIndicator integer_range(long lo, long hi) {
    if (hi < lo) throw SpecError("FiniteSetIndicator: empty integer range");
    std::vector<double> m;
    for (long v = lo; v <= hi; ++v) m.push_back(static_cast<double>(v));
    return FiniteSetIndicator(std::move(m));
  }

  bool contains(double t) const noexcept { return std::binary_search(elements.begin(), elements.end(), t); }

  double value(std::span<const double> t) const noexcept {
    for (double v : t)
      if (!contains(v)) return kInfinity;
    return 0.0;
  }

  /// Nearest element; exact ties go to the smaller element.
  double nearest(double v) const noexcept {
    auto it = std::lower_bound(elements.begin(), elements.end(), v);
    if (it == elements.begin()) return *it;
    if (it == elements.end()) return elements.back();
    const double above = *it;
    const double below = *(it - 1);
    return (above - v < v - below) ? above : below;
  }
};

// ---------------------------------------------------------------------------
// Scalar kernels

template <std::floating_point T>
T soft_threshold(T v, T c) noexcept {
  if (v > c) return v - c;
  if (v < -c) return v + c;
  return T(0);
}

/// Exact global minimizer of c F(t) + (t - v)^2 / 2, F the clipped quadratic
/// shape with parameter eta. The objective is piecewise quadratic, so the
/// minimizer is among at most six candidates:
///   0, +-1/(2 eta), v when |v| >= 1/(2 eta), and the stationary points of
///   the two inner pieces when those pieces are strictly convex (1 - 2 c eta > 0).
/// Ties: smaller |t| first, then the nonnegative candidate.
template <std::floating_point T>
T prox_clipped_quad(T v, T c, T eta) noexcept {
  const T bp = T(0.5) / eta;
  auto objective = [&](T t) {
    const T d = t - v;
    return c * ClippedQuadPenalty::shape(t, eta) + T(0.5) * d * d;
  };

  T best = T(0);
  T best_obj = objective(T(0));
  auto consider = [&](T t) {
    const T o = objective(t);
    const T at = std::abs(t);
    const T ab = std::abs(best);
    if (o < best_obj || (o == best_obj && (at < ab || (at == ab && t > best)))) {
      best = t;
      best_obj = o;
    }
  };

  consider(bp);
  consider(-bp);
  if (std::abs(v) >= bp) consider(v);
  const T curvature = T(1) - T(2) * c * eta;
  if (curvature > T(0)) {
    const T right = (v - c) / curvature;
    if (right > T(0) && right < bp) consider(right);
    const T left = (v + c) / curvature;
    if (left < T(0) && left > -bp) consider(left);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Vector operations

inline Vector soft_threshold(std::span<const double> v, double c) {
  if (!(c > 0.0)) throw SpecError("soft_threshold: threshold must be positive");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], c);
  return out;
}

/// prox of step * lambda * sum_j F(t_j), coordinate-wise.
inline Vector prox_clipped_quad(std::span<const double> v, const ClippedQuadPenalty& penalty, double step) {
  if (!(step > 0.0)) throw SpecError("prox_clipped_quad: step must be positive");
  const double c = penalty.lambda * step;
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = prox_clipped_quad(v[i], c, penalty.eta);
  return out;
}

/// Projection onto M^N; the step does not matter for an indicator.
inline Vector project_finite_set(std::span<const double> v, const FiniteSetIndicator& ind,
                                 double /*step*/ = 1.0) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = ind.nearest(v[i]);
  return out;
}

/// Brute-force reference prox: argmin of value_fn(t) + (t - v)^2 / (2 step)
/// over the grid v - window, v - window + resolution, ..., v + window and the
/// two extra points 0 and v. First minimum wins.
template <std::invocable<double> ValueFn>
double prox_grid_oracle(double v, ValueFn&& value_fn, double step, double window, double resolution) {
  if (!(resolution > 0.0) || !(window > 0.0) || !(step > 0.0))
    throw SpecError("prox_grid_oracle: step, window and resolution must be positive");
  auto objective = [&](double t) {
    const double d = t - v;
    return static_cast<double>(value_fn(t)) + d * d / (2.0 * step);
  };
  double best = v;
  double best_obj = objective(v);
  auto consider = [&](double t) {
    const double o = objective(t);
    if (o < best_obj) {
      best = t;
      best_obj = o;
    }
  };
  consider(0.0);
  const auto count = static_cast<long>(std::floor(2.0 * window / resolution));
  const double start = v - window;
  for (long i = 0; i <= count; ++i) consider(start + static_cast<double>(i) * resolution);
  return best;
}

// ---------------------------------------------------------------------------
// Oracle adapters

inline ProxOracle clipped_quad_oracle(const ClippedQuadPenalty& penalty, std::size_t dim) {
  if (!(penalty.lambda > 0.0) || !(penalty.eta > 0.0))
    throw SpecError("ClippedQuadPenalty: lambda and eta must be positive");
  return ProxOracle::separable(
      dim, [penalty](double t) { return penalty.value(t); },
      [penalty](std::span<const double> v, double step, std::span<double> out) {
        const double c = penalty.lambda * step;
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = prox_clipped_quad(v[i], c, penalty.eta);
      });
}

inline ProxOracle finite_set_oracle(FiniteSetIndicator ind, std::size_t dim) {
  return ProxOracle::separable(
      dim, [ind](double t) { return ind.contains(t) ? 0.0 : kInfinity; },
      [ind](std::span<const double> v, double, std::span<double> out) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = ind.nearest(v[i]);
      });
}

/// weight * ||t||_1
inline ProxOracle l1_oracle(double weight, std::size_t dim) {
  if (!(weight > 0.0)) throw SpecError("l1_oracle: weight must be positive");
  return ProxOracle::separable(
      dim, [weight](double t) { return weight * std::abs(t); },
      [weight](std::span<const double> v, double step, std::span<double> out) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], weight * step);
      });
}

}  // namespace ladmm
