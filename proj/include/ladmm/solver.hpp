#pragma once

// Two-block and multi-block parallel linearized ADMM.
//
// One iteration, for blocks i = 1..K (independently, possibly in parallel):
//   x_i+ = prox_{f_i / L_x}( x_i - [A_i^T gamma + grad_{x_i} g(x, y) + beta A_i^T (Ax + By)] / L_x )
// then
//   y+     = (L_y I + beta B^T B)^{-1} ( L_y y - grad_y g(x+, y) - grad h(y) - B^T gamma - beta B^T A x+ )
//   gamma+ = gamma + beta (A x+ + B y+)
//
// K = 1 is the two-block method. Diagnostics evaluate the augmented Lagrangian
// around each half step and check the descent inequalities that drive the
// convergence argument.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ladmm/certify.hpp"
#include "ladmm/core_model.hpp"
#include "ladmm/error.hpp"
#include "ladmm/linalg.hpp"

namespace ladmm {

enum class StopMode {
  algorithm_gap,   // max(dx, dy, dgamma)
  experiment_gap,  // max(dx, dy, ||Ax + By||)
};

enum class DiagLevel { off, trace, assertions };

enum class Termination { converged, iteration_cap };

inline const char* to_string(Termination t) noexcept {
  return t == Termination::converged ? "converged" : "iteration_cap";
}

struct StoppingRule {
  double epsilon = 1e-4;
  StopMode mode = StopMode::experiment_gap;
  long max_iters = 1'000'000;

  double gap(const Residuals& r) const noexcept {
    const double third = mode == StopMode::algorithm_gap ? r.dgamma : r.feas;
    return std::max({r.dx, r.dy, third});
  }
};

/// Cholesky factor of L_y I + beta B^T B, built once per (L_y, beta).
class YSolveCache {
 public:
  YSolveCache(const Matrix& b, double l_y, double beta) { rebuild(b, l_y, beta); }

  void ensure(const Matrix& b, double l_y, double beta) {
    if (l_y != l_y_ || beta != beta_) rebuild(b, l_y, beta);
  }

  double L_y() const noexcept { return l_y_; }
  double beta() const noexcept { return beta_; }

  void solve_in_place(std::span<double> rhs) const { factor_.solve_in_place(rhs); }
  Vector solve(std::span<const double> rhs) const { return factor_.solve(rhs); }

 private:
  void rebuild(const Matrix& b, double l_y, double beta) {
    if (!(l_y > 0.0) || !(beta > 0.0)) throw SpecError("YSolveCache: L_y and beta must be positive");
    Matrix system = gram(b);
    system *= beta;
    for (std::size_t i = 0; i < system.rows(); ++i) system(i, i) += l_y;
    try {
      factor_ = CholeskyFactor(system);
    } catch (const RankError& e) {
      throw SpecError(std::string("y-update system could not be factored: ") + e.what());
    }
    l_y_ = l_y;
    beta_ = beta;
  }

  CholeskyFactor factor_;
  double l_y_ = 0.0;
  double beta_ = 0.0;
};

struct DiagnosticsRecord {
  long iter = 0;
  double L_beta = 0.0;
  double m_k = 0.0;
  double objective = 0.0;
  double dx = 0.0, dy = 0.0, dgamma = 0.0, feas = 0.0;
  double kkt_x = 0.0;
  double kkt_y = 0.0;
  double slack_x = 0.0;      // [L before x-step - after] - C_0 dx^2
  double slack_y = 0.0;      // [L before y-step - after] - C_1 dy^2
  double slack_gamma = 0.0;  // C_2 dx^2 + C_3 dy^2 + C_4 dy_prev^2 - dgamma^2 / beta

  // Not part of the trace file.
  double dual_identity_residual = 0.0;  // ||B^T gamma+ + grad_y g(x+, y) + grad h(y) + L_y (y+ - y)||
  double L_before_x = 0.0;
  double L_after_x = 0.0;
  double L_after_y = 0.0;
  double dy_prev = 0.0;
};

struct RunOptions {
  DiagLevel diag = DiagLevel::off;
  std::function<void(const DiagnosticsRecord&)> sink;
  bool skip_assumption_checks = false;
  int threads = 1;  // 0: all hardware threads
};

struct RunReport {
  Termination termination = Termination::iteration_cap;
  long iterations = 0;
  Residuals final_residuals;
  double kkt_x = 0.0;
  double kkt_y = 0.0;
  double objective = 0.0;
  double L_beta = 0.0;
  bool certified = false;

  // Stationarity bounds at termination, in terms of the last residuals:
  //   kkt_x <= L_g (dx + dy) + sqrt(L_A) (2 dgamma + dgamma_prev) + L_x dx
  //   kkt_y <= (L_w + L_y) dy + sqrt(L_B) dgamma,   feas = dgamma / beta
  double kkt_x_bound = 0.0;
  double kkt_y_bound = 0.0;
  bool stationarity_bounds_hold = false;

  double max_gamma_norm = 0.0;
  long max_gamma_iter = 0;
  double objective_change = 0.0;  // |objective(final) - objective(final - 1)|

  // Filled in by instance generators / the CLI.
  std::string trace_path;
  std::string generator;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct RunResult {
  RunReport report;
  IterateState state;
};

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// w = gamma + beta (Ax + By)
inline Vector dual_aggregate(std::span<const double> gamma, std::span<const double> ax,
                             std::span<const double> by, double beta) {
  Vector w(gamma.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = gamma[i] + beta * (ax[i] + by[i]);
  return w;
}

inline void x_update_block_into(const ProblemSpec& spec, std::span<const double> x,
                                std::span<const double> grad_x, std::span<const double> w, double l_x,
                                std::size_t block, std::span<double> out) {
  const std::size_t first = spec.block_offset(block);
  const std::size_t size = spec.block_size(block);
  Vector point(size);
  multiply_transposed(spec.A(), w, point, first);
  for (std::size_t j = 0; j < size; ++j) point[j] = x[first + j] - (point[j] + grad_x[first + j]) / l_x;
  spec.f(block).prox(point, 1.0 / l_x, out.subspan(first, size));
}

}  // namespace detail

/// New value of block i, a pure function of (x, y, gamma).
inline Vector x_update_block(const ProblemSpec& spec, const IterateState& state, const Certificate& params,
                             std::size_t block) {
  if (block >= spec.block_count()) throw SpecError("x_update_block: block index out of range");
  Vector grad_x(spec.p());
  spec.g_gradient(state.x, state.y, grad_x, {});
  const Vector w = detail::dual_aggregate(state.gamma, state.Ax, state.By, params.beta);
  Vector full(spec.p());
  detail::x_update_block_into(spec, state.x, grad_x, w, params.L_x, block, full);
  const auto first = static_cast<std::ptrdiff_t>(spec.block_offset(block));
  return Vector(full.begin() + first, full.begin() + first + static_cast<std::ptrdiff_t>(spec.block_size(block)));
}

/// All blocks. Blocks write disjoint slices, so they may run concurrently.
inline Vector x_update(const ProblemSpec& spec, const IterateState& state, const Certificate& params,
                       int threads = 1) {
  Vector grad_x(spec.p());
  spec.g_gradient(state.x, state.y, grad_x, {});
  const Vector w = detail::dual_aggregate(state.gamma, state.Ax, state.By, params.beta);
  Vector next(spec.p());
  const auto blocks = static_cast<long>(spec.block_count());
  const int nt = std::min<long>(detail::resolve_threads(threads), blocks);
  if (nt <= 1) {
    for (long i = 0; i < blocks; ++i)
      detail::x_update_block_into(spec, state.x, grad_x, w, params.L_x, static_cast<std::size_t>(i), next);
    return next;
  }
  std::exception_ptr failure;
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long i = 0; i < blocks; ++i) {
    try {
      detail::x_update_block_into(spec, state.x, grad_x, w, params.L_x, static_cast<std::size_t>(i), next);
    } catch (...) {
#pragma omp critical(ladmm_x_update_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return next;
}

/// Exact minimizer of the linearized y-subproblem, given x+ and A x+.
inline Vector y_update(const ProblemSpec& spec, const IterateState& state, std::span<const double> x_next,
                       std::span<const double> ax_next, const Certificate& params, const YSolveCache& cache) {
  const std::size_t q = spec.q();
  Vector grad_y(q);
  spec.g_gradient(x_next, state.y, {}, grad_y);
  const Vector grad_h = spec.h().gradient(state.y);
  Vector u(spec.n());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = state.gamma[i] + params.beta * ax_next[i];
  Vector rhs = multiply_transposed(spec.B(), u);
  for (std::size_t j = 0; j < q; ++j) rhs[j] = params.L_y * state.y[j] - grad_y[j] - grad_h[j] - rhs[j];
  cache.solve_in_place(rhs);
  return rhs;
}

/// gamma + beta (A x + B y)
inline Vector gamma_update(std::span<const double> gamma, std::span<const double> ax, std::span<const double> by,
                           double beta) {
  return detail::dual_aggregate(gamma, ax, by, beta);
}

inline Vector gamma_update(const IterateState& state, double beta) {
  return gamma_update(state.gamma, state.Ax, state.By, beta);
}

/// Diagnostics for the iteration that produced `state` (state.iter >= 1).
/// `prev` supplies L_beta at the previous iterate when available.
inline DiagnosticsRecord compute_diagnostics(const ProblemSpec& spec, const IterateState& state,
                                             const Certificate& params, const DiagnosticsRecord* prev = nullptr) {
  if (state.iter < 1) throw StateError("compute_diagnostics: no iteration has completed");
  const double beta = params.beta;
  DiagnosticsRecord d;
  d.iter = state.iter;
  const Residuals r = residuals(state);
  d.dx = r.dx;
  d.dy = r.dy;
  d.dgamma = r.dgamma;
  d.feas = r.feas;
  d.dy_prev = distance(state.y_prev, state.y_prev2);

  d.L_before_x = (prev != nullptr && prev->iter == state.iter - 1)
                     ? prev->L_beta
                     : evaluate_lagrangian(spec, state.x_prev, state.y_prev, state.gamma_prev, state.Ax_prev,
                                           state.By_prev, beta);
  d.L_after_x = evaluate_lagrangian(spec, state.x, state.y_prev, state.gamma_prev, state.Ax, state.By_prev, beta);
  d.L_after_y = evaluate_lagrangian(spec, state.x, state.y, state.gamma_prev, state.Ax, state.By, beta);
  d.L_beta = evaluate_lagrangian(spec, state, beta);
  d.objective = evaluate_objective(spec, state.x, state.y);
  d.m_k = d.L_beta + params.C_m * d.dy * d.dy;

  d.slack_x = (d.L_before_x - d.L_after_x) - params.C_0 * d.dx * d.dx;
  d.slack_y = (d.L_after_x - d.L_after_y) - params.C_1 * d.dy * d.dy;
  d.slack_gamma = params.C_2 * d.dx * d.dx + params.C_3 * d.dy * d.dy + params.C_4 * d.dy_prev * d.dy_prev -
                  d.dgamma * d.dgamma / beta;

  const std::size_t p = spec.p();
  const std::size_t q = spec.q();
  const std::size_t n = spec.n();

  // y-stationarity at the current iterate.
  Vector gy(q);
  spec.g_gradient(state.x, state.y, {}, gy);
  const Vector hy = spec.h().gradient(state.y);
  const Vector w_new = detail::dual_aggregate(state.gamma, state.Ax, state.By, beta);
  const Vector bt_w = multiply_transposed(spec.B(), w_new);
  Vector ky(q);
  for (std::size_t j = 0; j < q; ++j) ky[j] = gy[j] + hy[j] + bt_w[j];
  d.kkt_y = norm(ky);

  // B^T gamma+ = -grad_y g(x+, y) - grad h(y) - L_y (y+ - y)
  Vector gy_old(q);
  spec.g_gradient(state.x, state.y_prev, {}, gy_old);
  const Vector hy_old = spec.h().gradient(state.y_prev);
  const Vector bt_gamma = multiply_transposed(spec.B(), state.gamma);
  Vector id(q);
  for (std::size_t j = 0; j < q; ++j)
    id[j] = bt_gamma[j] + gy_old[j] + hy_old[j] + params.L_y * (state.y[j] - state.y_prev[j]);
  d.dual_identity_residual = norm(id);

  // Subgradient element of the x-part built from the prox optimality condition:
  //   d      = -[grad_x g(x, y) + A^T (gamma + beta (Ax + By)) + L_x (x+ - x)]   (element of the subdifferential of f at x+)
  //   d_bar  = grad_x g(x+, y+) + d + A^T (gamma+ + beta (Ax+ + By+))
  Vector gx_old(p);
  Vector gx_new(p);
  spec.g_gradient(state.x_prev, state.y_prev, gx_old, {});
  spec.g_gradient(state.x, state.y, gx_new, {});
  const Vector w_old = detail::dual_aggregate(state.gamma_prev, state.Ax_prev, state.By_prev, beta);
  Vector dw(n);
  for (std::size_t i = 0; i < n; ++i) dw[i] = w_new[i] - w_old[i];
  Vector kx = multiply_transposed(spec.A(), dw);
  for (std::size_t j = 0; j < p; ++j)
    kx[j] += gx_new[j] - gx_old[j] - params.L_x * (state.x[j] - state.x_prev[j]);
  d.kkt_x = norm(kx);
  return d;
}

namespace detail {

inline double lemma_tolerance(double scale, double magnitude) { return scale * (1.0 + std::abs(magnitude)); }

inline void fail(const char* check, long iter, const std::string& detail) {
  throw DiagnosticError(check, iter, std::string(check) + " violated at iteration " + std::to_string(iter) + ": " + detail);
}

/// Per-iteration runtime checks. The dual-ascent bound and the merit
/// monotonicity need certified parameters and an iteration whose predecessor
/// already satisfies the dual identity (iter >= 2).
inline void assert_record(const DiagnosticsRecord& d, const DiagnosticsRecord* prev, const Certificate& params,
                          double gamma_norm) {
  const double l_mag = std::max({std::abs(d.L_before_x), std::abs(d.L_after_x), std::abs(d.L_after_y),
                                 std::abs(d.L_beta)});
  if (!(d.dual_identity_residual <= lemma_tolerance(1e-9, gamma_norm)))
    fail("dual identity", d.iter, "residual " + std::to_string(d.dual_identity_residual));
  if (!(d.slack_x >= -lemma_tolerance(1e-9, l_mag)))
    fail("x-step descent", d.iter, "slack " + std::to_string(d.slack_x));
  if (!(d.slack_y >= -lemma_tolerance(1e-9, l_mag)))
    fail("y-step descent", d.iter, "slack " + std::to_string(d.slack_y));
  if (!params.certified || d.iter < 2) return;
  if (!(d.slack_gamma >= -lemma_tolerance(1e-9, l_mag)))
    fail("dual ascent bound", d.iter, "slack " + std::to_string(d.slack_gamma));
  if (prev != nullptr && prev->iter == d.iter - 1 && prev->iter >= 1 &&
      !(d.m_k <= prev->m_k + lemma_tolerance(1e-8, prev->m_k)))
    fail("merit monotonicity", d.iter,
         "m_k rose from " + std::to_string(prev->m_k) + " to " + std::to_string(d.m_k));
}

}  // namespace detail

/// Runs the iteration from `init` until the stopping rule fires.
inline RunResult run(const ProblemSpec& spec, const Certificate& params, const StoppingRule& stopping,
                     IterateState init, const RunOptions& options = {}) {
  if (!(stopping.epsilon > 0.0)) throw SpecError("run: epsilon must be positive");
  if (stopping.max_iters < 1) throw SpecError("run: max_iters must be positive");
  if (!(params.beta > 0.0) || !(params.L_x > 0.0) || !(params.L_y > 0.0))
    throw SpecError("run: beta, L_x and L_y must be positive");
  spec.check_dimensions(init.x, init.y);
  if (init.gamma.size() != spec.n()) throw SpecError("run: gamma has wrong dimension");
  if (!options.skip_assumption_checks) {
    const AssumptionReport a = check_assumptions(spec);
    if (!a.b_full_column_rank) throw RankError(a.message);
    if (!a.range_inclusion) throw SpecError(a.message);
  }

  const bool want_records = options.diag != DiagLevel::off;
  const bool asserting = options.diag == DiagLevel::assertions;
  const YSolveCache cache(spec.B(), params.L_y, params.beta);

  IterateState state = std::move(init);
  state.refresh_cache(spec);

  RunReport report;
  report.certified = params.certified;
  report.max_gamma_norm = norm(state.gamma);
  report.max_gamma_iter = state.iter;
  const long first_iter = state.iter;
  double prev_objective = evaluate_objective(spec, state.x, state.y);
  std::optional<DiagnosticsRecord> prev_record;
  Residuals res;

  while (true) {
    Vector x_next = x_update(spec, state, params, options.threads);
    Vector ax_next = multiply(spec.A(), x_next);
    Vector y_next = y_update(spec, state, x_next, ax_next, params, cache);
    Vector by_next = multiply(spec.B(), y_next);
    Vector gamma_next = gamma_update(state.gamma, ax_next, by_next, params.beta);
    state.advance(std::move(x_next), std::move(ax_next), std::move(y_next), std::move(by_next),
                  std::move(gamma_next));

    if (!all_finite(state.x) || !all_finite(state.y) || !all_finite(state.gamma))
      throw NumericError("run: iterate became non-finite at iteration " + std::to_string(state.iter));

    res = residuals(state);
    const double gamma_norm = norm(state.gamma);
    if (gamma_norm > report.max_gamma_norm) {
      report.max_gamma_norm = gamma_norm;
      report.max_gamma_iter = state.iter;
    }

    const double objective = evaluate_objective(spec, state.x, state.y);
    report.objective_change = std::abs(objective - prev_objective);
    prev_objective = objective;

    if (want_records) {
      DiagnosticsRecord rec = compute_diagnostics(spec, state, params, prev_record ? &*prev_record : nullptr);
      if (asserting) detail::assert_record(rec, prev_record ? &*prev_record : nullptr, params, gamma_norm);
      if (options.sink) options.sink(rec);
      prev_record = rec;
    }

    if (stopping.gap(res) < stopping.epsilon) {
      report.termination = Termination::converged;
      break;
    }
    if (state.iter - first_iter >= stopping.max_iters) {
      report.termination = Termination::iteration_cap;
      break;
    }
  }

  const DiagnosticsRecord last =
      (prev_record && prev_record->iter == state.iter) ? *prev_record : compute_diagnostics(spec, state, params);
  report.iterations = state.iter - first_iter;
  report.final_residuals = res;
  report.kkt_x = last.kkt_x;
  report.kkt_y = last.kkt_y;
  report.objective = last.objective;
  report.L_beta = last.L_beta;

  const SpectralConstants& k = params.constants;
  double r_prev = 0.0;  // ||A x + B y|| one step back; beta times it is the previous dual step
  for (std::size_t i = 0; i < spec.n(); ++i) {
    const double v = state.Ax_prev[i] + state.By_prev[i];
    r_prev += v * v;
  }
  const double dgamma_prev = params.beta * std::sqrt(r_prev);
  report.kkt_x_bound = params.L_g * (res.dx + res.dy) + std::sqrt(k.L_A) * (2.0 * res.dgamma + dgamma_prev) +
                       params.L_x * res.dx;
  report.kkt_y_bound = (params.L_g + params.L_h + params.L_y) * res.dy + std::sqrt(k.L_B) * res.dgamma;
  auto within = [](double observed, double bound) { return observed <= bound * (1.0 + 1e-9) + 1e-12; };
  report.stationarity_bounds_hold = within(report.kkt_x, report.kkt_x_bound) &&
                                    within(report.kkt_y, report.kkt_y_bound);
  if (asserting && !report.stationarity_bounds_hold)
    detail::fail("stationarity bound", state.iter,
                 "kkt_x " + std::to_string(report.kkt_x) + " (bound " + std::to_string(report.kkt_x_bound) +
                     "), kkt_y " + std::to_string(report.kkt_y) + " (bound " + std::to_string(report.kkt_y_bound) + ")");

  return {std::move(report), std::move(state)};
}

}  // namespace ladmm
