#pragma once

// Spectral constants, the machine-checkable standing assumptions, and the
// parameter rule
//
//   L_y  >= L_w + L_w^2 + 3
//   C_m   = (L_y + L_w^2) / 2
//   beta >= max{ (L_w + L_y + 2) / lambda_BB,
//                3 (L_w^2 + L_y^2) / (lambda_BB C_m),
//                3 L_y^2 / lambda_BB }
//   L_x  >= L_g + beta L_A + 6 L_w^2 + 1
//
// together with the descent coefficients C_0..C_4 consumed by the solver's
// runtime checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ladmm/core_model.hpp"
#include "ladmm/error.hpp"
#include "ladmm/linalg.hpp"

namespace ladmm {

namespace detail {

struct PowerIterationResult {
  double value = 0.0;
  Vector vector;
  int iterations = 0;
};

/// Power iteration for the dominant eigenvalue of a symmetric positive
/// semidefinite operator. Stops when both the last Rayleigh-quotient change
/// and its geometric-tail extrapolation are below abs_target(estimate).
template <typename Apply, typename Target>
PowerIterationResult power_iteration(std::size_t dim, Apply&& apply, Target&& abs_target, int max_iter,
                                     const char* what) {
  auto normalize = [](Vector& v) {
    const double nv = norm(v);
    for (auto& e : v) e /= nv;
  };

  // Generic start: structured vectors such as all-ones are often exact
  // eigenvectors of the wrong eigenvalue.
  Vector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + 2.0 * static_cast<double>(i));
  normalize(v);
  Vector w(dim);
  apply(v, w);
  if (norm(w) == 0.0) return {0.0, v, 1};

  double estimate = dot(v, w);
  double prev_delta = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    v = w;
    normalize(v);
    apply(v, w);
    const double next = dot(v, w);
    const double delta = std::abs(next - estimate);
    estimate = next;
    double tail = delta;
    if (prev_delta > 0.0) {
      const double ratio = delta / prev_delta;
      tail = ratio < 1.0 ? delta * ratio / (1.0 - ratio) : kInfinity;
    }
    const double target = abs_target(estimate);
    if (delta == 0.0 || (delta <= target && tail <= target)) return {estimate, v, it};
    prev_delta = delta;
  }
  throw SpectralError(std::string(what) + ": power iteration did not converge", estimate);
}

}  // namespace detail

inline constexpr double kSpectralTolerance = 1e-10;
inline constexpr int kSpectralMaxIterations = 20000;
inline constexpr double kRankThreshold = 1e-10;
inline constexpr double kRangeTolerance = 1e-8;

/// Largest eigenvalue of M^T M.
inline double top_eigenvalue_gram(const Matrix& m) {
  if (m.empty()) throw SpecError("top_eigenvalue_gram: empty matrix");
  Vector mv(m.rows());
  auto apply = [&](std::span<const double> v, std::span<double> out) {
    multiply(m, v, mv);
    multiply_transposed(m, mv, out);
  };
  return detail::power_iteration(
             m.cols(), apply, [](double est) { return kSpectralTolerance * std::abs(est); },
             kSpectralMaxIterations, "top_eigenvalue_gram")
      .value;
}

/// Smallest eigenvalue of B^T B via power iteration on s I - B^T B, s the top
/// eigenvalue. Throws RankError when the result is not above 1e-10 s.
inline double min_eigenvalue_gram(const Matrix& b) {
  if (b.empty()) throw SpecError("min_eigenvalue_gram: empty matrix");
  if (b.rows() < b.cols()) throw RankError("min_eigenvalue_gram: B has fewer rows than columns");
  const double shift = top_eigenvalue_gram(b);
  if (shift == 0.0) throw RankError("min_eigenvalue_gram: B is zero");
  Vector bv(b.rows());
  auto apply = [&](std::span<const double> v, std::span<double> out) {
    multiply(b, v, bv);
    multiply_transposed(b, bv, out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = shift * v[i] - out[i];
  };
  // The target is relative to the smallest eigenvalue itself, floored near
  // machine precision of the shift.
  auto target = [shift](double est) {
    return kSpectralTolerance * std::max(shift - est, 1e-4 * kSpectralTolerance * shift);
  };
  const auto shifted = detail::power_iteration(b.cols(), apply, target, kSpectralMaxIterations,
                                               "min_eigenvalue_gram");
  double smallest = shift - shifted.value;
  if (shifted.value != 0.0) {
    // Rayleigh quotient of B^T B at the converged vector; equal to shift - value
    // up to rounding, without the cancellation.
    multiply(b, shifted.vector, bv);
    smallest = squared_norm(bv) / squared_norm(shifted.vector);
  }
  if (!(smallest > kRankThreshold * shift))
    throw RankError("B is not of full column rank: smallest eigenvalue of B^T B is " +
                    std::to_string(smallest) + ", largest " + std::to_string(shift));
  return smallest;
}

/// Im(A) within Im(B): each column of A has a least-squares preimage under B
/// reproducing it to 1e-8 (1 + ||a_j||).
inline bool check_range_inclusion(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw SpecError("check_range_inclusion: A and B row counts differ");
  min_eigenvalue_gram(b);  // throws RankError
  const CholeskyFactor normal(gram(b));
  Vector col(a.rows());
  Vector bz(b.rows());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (std::size_t r = 0; r < a.rows(); ++r) col[r] = a(r, j);
    const Vector z = normal.solve(multiply_transposed(b, col));
    multiply(b, z, bz);
    if (distance(bz, col) > kRangeTolerance * (1.0 + norm(col))) return false;
  }
  return true;
}

struct SpectralConstants {
  double L_A = 0.0;        // largest eigenvalue of A^T A (A all blocks side by side)
  double lambda_BB = 0.0;  // smallest eigenvalue of B^T B
  double L_w = 0.0;        // L_g + L_h
  double L_B = 0.0;        // largest eigenvalue of B^T B; only used for stationarity bounds
};

inline SpectralConstants compute_spectral_constants(const ProblemSpec& spec) {
  SpectralConstants c;
  c.L_A = top_eigenvalue_gram(spec.A());
  c.lambda_BB = min_eigenvalue_gram(spec.B());
  c.L_B = top_eigenvalue_gram(spec.B());
  c.L_w = spec.g().lipschitz_constant() + spec.h().lipschitz_constant();
  return c;
}

/// Result of checking the standing assumptions on a problem.
struct AssumptionReport {
  bool b_full_column_rank = false;
  bool range_inclusion = false;
  bool coercive_attested = false;  // not machine checkable; carried from the instance builder
  double lambda_BB = 0.0;
  std::string message;

  bool ok() const noexcept { return b_full_column_rank && range_inclusion; }
};

inline AssumptionReport check_assumptions(const ProblemSpec& spec) {
  AssumptionReport r;
  r.coercive_attested = spec.coercive_attested();
  try {
    r.lambda_BB = min_eigenvalue_gram(spec.B());
    r.b_full_column_rank = true;
  } catch (const RankError& e) {
    r.message = e.what();
    return r;
  }
  r.range_inclusion = check_range_inclusion(spec.A(), spec.B());
  if (!r.range_inclusion) r.message = "Im(A) is not contained in Im(B)";
  return r;
}

struct Violation {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct Certificate {
  double beta = 0.0;
  double L_x = 0.0;
  double L_y = 0.0;
  double C_m = 0.0;
  double C_0 = 0.0, C_1 = 0.0, C_2 = 0.0, C_3 = 0.0, C_4 = 0.0;
  double L_g = 0.0, L_h = 0.0;
  SpectralConstants constants;
  bool certified = false;
  std::vector<Violation> violations;

  bool violates(const std::string& name) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.name == name; });
  }
};

// Names used in Certificate::violations.
inline constexpr const char* kBoundLx = "L_x >= L_g + beta*L_A + 6*L_w^2 + 1";
inline constexpr const char* kBoundLy = "L_y >= L_w + L_w^2 + 3";
inline constexpr const char* kBoundBeta1 = "beta >= (L_w + L_y + 2)/lambda_BB";
inline constexpr const char* kBoundBeta2 = "beta >= 3*(L_w^2 + L_y^2)/(lambda_BB*C_m)";
inline constexpr const char* kBoundBeta3 = "beta >= 3*L_y^2/lambda_BB";
inline constexpr const char* kCoefX = "C_0 - C_2 >= 1/2";
inline constexpr const char* kCoefY = "C_1 - C_3 - C_m >= 1/2";
inline constexpr const char* kCoefM = "C_m - C_4 > 0";

namespace detail {

inline void fill_coefficients(Certificate& c) {
  const double lw = c.constants.L_w;
  const double bl = c.beta * c.constants.lambda_BB;
  c.C_m = 0.5 * (c.L_y + lw * lw);
  c.C_0 = 0.5 * (c.L_x - c.L_g - c.beta * c.constants.L_A);
  c.C_1 = 0.5 * (2.0 * c.L_y - lw);
  c.C_2 = 3.0 * lw * lw / bl;
  c.C_3 = 3.0 * c.L_y * c.L_y / bl;
  c.C_4 = 3.0 * (lw * lw + c.L_y * c.L_y) / bl;
}

// Bounds taken with equality must survive a rounding-level shortfall.
inline bool at_least(double lhs, double rhs) {
  return lhs >= rhs - 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

}  // namespace detail

/// Checks the parameter rule and the three descent-coefficient conditions.
/// C_0..C_4 are always populated; certified iff nothing is violated.
inline Certificate validate_parameters(double beta, double L_x, double L_y, const SpectralConstants& constants,
                                       double L_g, double L_h) {
  if (!(beta > 0.0) || !(L_x > 0.0) || !(L_y > 0.0))
    throw SpecError("validate_parameters: beta, L_x and L_y must be positive");
  if (!(constants.lambda_BB > 0.0)) throw SpecError("validate_parameters: lambda_BB must be positive");
  Certificate c;
  c.beta = beta;
  c.L_x = L_x;
  c.L_y = L_y;
  c.L_g = L_g;
  c.L_h = L_h;
  c.constants = constants;
  c.constants.L_w = L_g + L_h;
  detail::fill_coefficients(c);

  const double lw = c.constants.L_w;
  const double lam = constants.lambda_BB;
  auto require = [&](const char* name, double lhs, double rhs) {
    if (!detail::at_least(lhs, rhs)) c.violations.push_back({name, lhs, rhs});
  };
  require(kBoundLx, L_x, L_g + beta * constants.L_A + 6.0 * lw * lw + 1.0);
  require(kBoundLy, L_y, lw + lw * lw + 3.0);
  require(kBoundBeta1, beta, (lw + L_y + 2.0) / lam);
  require(kBoundBeta2, beta, 3.0 * (lw * lw + L_y * L_y) / (lam * c.C_m));
  require(kBoundBeta3, beta, 3.0 * L_y * L_y / lam);
  require(kCoefX, c.C_0 - c.C_2, 0.5);
  require(kCoefY, c.C_1 - c.C_3 - c.C_m, 0.5);
  if (!(c.C_m - c.C_4 > 0.0)) c.violations.push_back({kCoefM, c.C_m - c.C_4, 0.0});
  c.certified = c.violations.empty();
  return c;
}

/// Smallest parameters allowed by the rule: L_y and C_m at equality, beta the
/// max of its three bounds, L_x at equality given beta.
inline Certificate derive_parameters(const SpectralConstants& constants, double L_g, double L_h) {
  if (!(constants.lambda_BB > 0.0)) throw SpecError("derive_parameters: lambda_BB must be positive");
  const double lw = L_g + L_h;
  const double lam = constants.lambda_BB;
  const double ly = lw + lw * lw + 3.0;
  const double cm = 0.5 * (ly + lw * lw);
  const double beta = std::max({(lw + ly + 2.0) / lam, 3.0 * (lw * lw + ly * ly) / (lam * cm), 3.0 * ly * ly / lam});
  const double lx = L_g + beta * constants.L_A + 6.0 * lw * lw + 1.0;
  return validate_parameters(beta, lx, ly, constants, L_g, L_h);
}

}  // namespace ladmm
