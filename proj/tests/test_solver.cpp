#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "ladmm/ladmm.hpp"
#include "oracles.hpp"

using namespace ladmm;

namespace {

oracle::Dense to_dense(const Matrix& m) {
  oracle::Dense d(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) d[r][c] = m(r, c);
  return d;
}

Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (auto& e : v) e = d(rng);
  return v;
}

// Scalar problem with f = 0, g = 0, h = 0, A = 1, B = -1.
ProblemSpec scalar_spec() {
  return ProblemSpec(SmoothOracle::zero(2), SmoothOracle::zero(1), {ProxOracle::zero(1)}, {Matrix{{1.0}}},
                     Matrix{{-1.0}}, false);
}

Certificate manual(double beta, double lx, double ly) {
  return validate_parameters(beta, lx, ly, {1.0, 1.0, 0.0, 1.0}, 0.0, 0.0);
}

LassoConfig lasso_config(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t k = 1) {
  LassoConfig c;
  c.N = n;
  c.M = m;
  c.seed = seed;
  c.K = k;
  return c;
}

double brute_force_argmin(const IntprogConfig& c) {
  double best = 0, best_v = kInfinity;
  for (long t = c.lo; t <= c.hi; ++t) {
    const double v = c.curvature * (t - c.target) * (t - c.target);
    if (v < best_v) best_v = v, best = static_cast<double>(t);
  }
  return best;
}

RunOptions opts(DiagLevel level, std::function<void(const DiagnosticsRecord&)> sink = {}, int threads = 1) {
  RunOptions o;
  o.diag = level;
  o.sink = std::move(sink);
  o.threads = threads;
  return o;
}

}  // namespace

TEST(XUpdate, ScalarZeroDrift) {
  const ProblemSpec spec = scalar_spec();
  const IterateState s = IterateState::initial(spec, {1.0}, {1.0}, {0.0});
  EXPECT_EQ(x_update_block(spec, s, manual(1.0, 2.0, 1.0), 0), Vector{1.0});
}

TEST(XUpdate, ScalarDualPull) {
  const ProblemSpec spec = scalar_spec();
  const IterateState s = IterateState::initial(spec, {1.0}, {1.0}, {2.0});
  EXPECT_EQ(x_update_block(spec, s, manual(1.0, 2.0, 1.0), 0), Vector{0.0});
}

TEST(XUpdate, ZeroProxIsGradientStep) {
  const ProblemSpec spec = scalar_spec();
  const IterateState s = IterateState::initial(spec, {3.0}, {1.0}, {0.5});
  // x - (gamma + beta (x - y)) / L_x
  EXPECT_DOUBLE_EQ(x_update(spec, s, manual(2.0, 4.0, 1.0))[0], 3.0 - (0.5 + 2.0 * 2.0) / 4.0);
}

TEST(XUpdate, BlockwiseMatchesStacked) {
  const LassoInstance one = generate_lasso(lasso_config(24, 6, 9, 1));
  const LassoInstance four = generate_lasso(lasso_config(24, 6, 9, 4));
  const Certificate p = lasso_parameters(lasso_config(24, 6, 9), one.spec);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = random_vector(rng, 24), y = random_vector(rng, 6), g = random_vector(rng, 6);
    const IterateState s1 = IterateState::initial(one.spec, x, y, g);
    const IterateState s4 = IterateState::initial(four.spec, x, y, g);
    const Vector stacked = x_update(one.spec, s1, p);
    EXPECT_EQ(x_update_block(one.spec, s1, p, 0), stacked);
    Vector pieces;
    for (std::size_t i = 0; i < 4; ++i) {
      const Vector b = x_update_block(four.spec, s4, p, i);
      pieces.insert(pieces.end(), b.begin(), b.end());
    }
    for (std::size_t j = 0; j < 24; ++j) EXPECT_NEAR(pieces[j], stacked[j], 1e-12 * (1 + std::abs(stacked[j])));
    EXPECT_EQ(x_update(four.spec, s4, p, 4), x_update(four.spec, s4, p, 1));
  }
}

TEST(XUpdate, BadBlockIndexThrows) {
  const ProblemSpec spec = scalar_spec();
  EXPECT_THROW(x_update_block(spec, IterateState::zeros(spec), manual(1, 2, 1), 1), SpecError);
}

TEST(YUpdate, LassoFixedPoint) {
  const LassoConfig c = lasso_config(16, 8, 2);
  const LassoInstance inst = generate_lasso(c);
  const Certificate p = lasso_parameters(c, inst.spec);
  const YSolveCache cache(inst.spec.B(), p.L_y, p.beta);
  const IterateState s = IterateState::initial(inst.spec, Vector(16, 0.0), inst.b, Vector(8, 0.0));
  const Vector y = y_update(inst.spec, s, Vector(16, 0.0), inst.b, p, cache);  // pretend A x+ = b
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(y[i], inst.b[i], 1e-12 * (1 + std::abs(inst.b[i])));
}

TEST(YUpdate, MatchesDenseSolveAndIsStationary) {
  // General B, nonzero g and h.
  std::mt19937_64 rng(3);
  const std::size_t n = 5, p = 3, q = 4;
  Matrix a(n, p), b(n, q);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) a(r, c) = std::normal_distribution<double>()(rng);
    for (std::size_t c = 0; c < q; ++c) b(r, c) = std::normal_distribution<double>()(rng);
  }
  const Vector hc = random_vector(rng, q), gc = random_vector(rng, p + q);
  const ProblemSpec spec(SmoothOracle::squared_distance(gc, 0.3), SmoothOracle::squared_distance(hc, 0.7),
                         {ProxOracle::zero(p)}, {a}, b, false);
  const Certificate prm = validate_parameters(5.0, 20.0, 3.0, compute_spectral_constants(spec), 0.6, 1.4);
  const YSolveCache cache(b, prm.L_y, prm.beta);
  const IterateState s = IterateState::initial(spec, random_vector(rng, p), random_vector(rng, q), random_vector(rng, n));
  const Vector xn = random_vector(rng, p);
  const Vector axn = multiply(a, xn);
  const Vector y = y_update(spec, s, xn, axn, prm, cache);

  // (L_y I + beta B^T B) y = L_y y_k - grad_y g(x+, y_k) - grad h(y_k) - B^T (gamma + beta A x+)
  auto bd = to_dense(b);
  auto btb = oracle::gram(bd);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < q; ++j) btb[i][j] *= prm.beta;
    btb[i][i] += prm.L_y;
  }
  Vector rhs(q);
  for (std::size_t j = 0; j < q; ++j) {
    double btu = 0.0;
    for (std::size_t r = 0; r < n; ++r) btu += bd[r][j] * (s.gamma[r] + prm.beta * axn[r]);
    const double gy = 2 * 0.3 * (s.y[j] - gc[p + j]);
    const double hy = 2 * 0.7 * (s.y[j] - hc[j]);
    rhs[j] = prm.L_y * s.y[j] - gy - hy - btu;
  }
  const Vector expect = oracle::solve(btb, rhs);
  for (std::size_t j = 0; j < q; ++j) EXPECT_NEAR(y[j], expect[j], 1e-10 * (1 + std::abs(expect[j])));

  // Gradient of the linearized subproblem vanishes at the output.
  for (std::size_t j = 0; j < q; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < q; ++i) sum += btb[j][i] * y[i];
    EXPECT_NEAR(sum - rhs[j], 0.0, 1e-10);
  }
}

TEST(YSolveCache, RebuildsOnlyOnChange) {
  YSolveCache cache(Matrix::identity(2, -1.0), 1.0, 2.0);
  const Vector u = cache.solve(Vector{3.0, 6.0});
  EXPECT_NEAR(u[0], 1.0, 1e-15);
  cache.ensure(Matrix::identity(2, -1.0), 1.0, 5.0);
  EXPECT_EQ(cache.beta(), 5.0);
  EXPECT_NEAR(cache.solve(Vector{6.0, 6.0})[1], 1.0, 1e-15);
  EXPECT_THROW(YSolveCache(Matrix::identity(2), 0.0, 1.0), SpecError);
}

TEST(GammaUpdate, Rules) {
  const Vector g{1.0, -2.0};
  EXPECT_EQ(gamma_update(g, Vector{1.0, 1.0}, Vector{-1.0, -1.0}, 3.0), g);
  EXPECT_EQ(gamma_update(Vector{0.0, 0.0}, Vector{1.0, 2.0}, Vector{0.5, -1.0}, 1.0), (Vector{1.5, 1.0}));
  const Vector once = gamma_update(g, Vector{1, 1}, Vector{0, 0}, 2.0);
  const Vector twice = gamma_update(once, Vector{0, 3}, Vector{0, 0}, 2.0);
  EXPECT_EQ(twice, gamma_update(g, Vector{1, 4}, Vector{0, 0}, 2.0));
}

TEST(Run, OriginIsFixedPointWhenBIsZero) {
  const LassoConfig c = lasso_config(8, 4, 1);
  LassoInstance inst = generate_lasso(c);
  const ProblemSpec spec = ProblemSpec::from_stacked(
      SmoothOracle::zero(12), SmoothOracle::squared_distance(Vector(4, 0.0)), {clipped_quad_oracle({0.1, 0.1}, 8)},
      inst.A, Matrix::identity(4, -1.0), true);
  const Certificate p = lasso_parameters(c, spec);
  const RunResult r = run(spec, p, {}, IterateState::zeros(spec), opts(DiagLevel::assertions));
  EXPECT_EQ(r.report.termination, Termination::converged);
  EXPECT_EQ(r.report.iterations, 1);
  EXPECT_EQ(r.report.final_residuals, (Residuals{0, 0, 0, 0}));
}

TEST(Run, IterationCapIsReportedNotThrown) {
  LassoConfig c = lasso_config(16, 8, 5);
  c.max_iters = 10;
  c.epsilon = 1e-14;
  const LassoRun r = solve_lasso(c);
  EXPECT_EQ(r.result.report.termination, Termination::iteration_cap);
  EXPECT_EQ(r.result.report.iterations, 10);
}

TEST(Run, RejectsRankDeficientB) {
  const ProblemSpec spec(SmoothOracle::zero(3), SmoothOracle::zero(2), {ProxOracle::zero(1)}, {Matrix{{1.0}, {1.0}}},
                         Matrix{{1.0, 1.0}, {1.0, 1.0}}, false);
  EXPECT_THROW(run(spec, manual(1, 1, 1), {}, IterateState::zeros(spec)), RankError);
}

TEST(Run, DiagnosticsAreConsistent) {
  LassoConfig c = lasso_config(32, 8, 6);
  c.max_iters = 300;
  c.epsilon = 1e-300;
  std::vector<DiagnosticsRecord> recs;
  RunOptions o;
  o.diag = DiagLevel::assertions;
  o.sink = [&](const DiagnosticsRecord& d) { recs.push_back(d); };
  const LassoRun r = solve_lasso(c, o);
  ASSERT_EQ(recs.size(), 300u);
  const double beta = r.params.beta;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& d = recs[k];
    EXPECT_EQ(d.iter, static_cast<long>(k + 1));
    EXPECT_NEAR(d.feas, d.dgamma / beta, 1e-12 * (1 + d.feas));
    EXPECT_LE(d.dual_identity_residual, 1e-9);
    EXPECT_NEAR(d.m_k, d.L_beta + r.params.C_m * d.dy * d.dy, 1e-12 * (1 + std::abs(d.m_k)));
    // The dual step raises L_beta by exactly dgamma^2 / beta.
    EXPECT_NEAR(d.L_beta - d.L_after_y, d.dgamma * d.dgamma / beta, 1e-9 * (1 + std::abs(d.L_beta)));
    if (k > 0) {
      EXPECT_EQ(d.L_before_x, recs[k - 1].L_beta);
      EXPECT_LE(d.m_k, recs[k - 1].m_k + 1e-8 * (1 + std::abs(recs[k - 1].m_k)));
    }
  }
  EXPECT_EQ(recs.front().dy_prev, 0.0);
}

TEST(Run, LagrangianAndMeritMatchIndependentRecomputation) {
  LassoConfig c = lasso_config(20, 6, 7);
  c.max_iters = 25;
  c.epsilon = 1e-300;
  const LassoInstance inst = generate_lasso(c);
  const Certificate p = lasso_parameters(c, inst.spec);
  const auto a = to_dense(inst.A);
  DiagnosticsRecord last;
  RunOptions o;
  o.diag = DiagLevel::trace;
  o.sink = [&](const DiagnosticsRecord& d) { last = d; };
  const RunResult r = run(inst.spec, p, {c.epsilon, c.mode, c.max_iters}, IterateState::zeros(inst.spec), o);
  const auto& s = r.state;
  const double lb = oracle::lasso_lagrangian(a, inst.b, 0.1, 0.1, s.x, s.y, s.gamma, p.beta);
  double dy2 = 0.0;
  for (std::size_t i = 0; i < s.y.size(); ++i) dy2 += (s.y[i] - s.y_prev[i]) * (s.y[i] - s.y_prev[i]);
  EXPECT_NEAR(last.L_beta, lb, 1e-10 * (1 + std::abs(lb)));
  EXPECT_NEAR(last.m_k, lb + 6.5 * dy2, 1e-10 * (1 + std::abs(lb)));
}

TEST(Run, ParallelBlocksAreBitwiseSerial) {
  LassoConfig c = lasso_config(64, 16, 8, 8);
  c.max_iters = 200;
  c.epsilon = 1e-300;
  std::vector<DiagnosticsRecord> a, b;
  const RunOptions o1 = opts(DiagLevel::trace, [&](const DiagnosticsRecord& d) { a.push_back(d); }, 1);
  const RunOptions o8 = opts(DiagLevel::trace, [&](const DiagnosticsRecord& d) { b.push_back(d); }, 8);
  const LassoRun r1 = solve_lasso(c, o1);
  const LassoRun r8 = solve_lasso(c, o8);
  EXPECT_EQ(r1.result.state.x, r8.result.state.x);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].L_beta, b[k].L_beta);
}

TEST(Run, FixedPointHasZeroStationarity) {
  // Feasible stationary point of the scalar problem: x = y, gamma = 0.
  const ProblemSpec spec = scalar_spec();
  const Certificate p = manual(1.0, 2.0, 1.0);
  IterateState s = IterateState::initial(spec, {0.7}, {0.7}, {0.0});
  const RunResult r = run(spec, p, {}, s, opts(DiagLevel::trace, [](const DiagnosticsRecord& d) {
                                             EXPECT_NEAR(d.kkt_x, 0.0, 1e-15);
                                             EXPECT_NEAR(d.kkt_y, 0.0, 1e-15);
                                             EXPECT_GE(d.slack_x, -1e-15);
                                             EXPECT_GE(d.slack_y, -1e-15);
                                           }));
  EXPECT_EQ(r.report.iterations, 1);
}

TEST(Run, StationarityBoundsHoldAtTermination) {
  LassoConfig c = lasso_config(32, 8, 11);
  c.epsilon = 1e-4;
  const LassoRun r = solve_lasso(c, opts(DiagLevel::assertions));
  EXPECT_EQ(r.result.report.termination, Termination::converged);
  EXPECT_TRUE(r.result.report.stationarity_bounds_hold);
  EXPECT_LE(r.result.report.kkt_x, r.result.report.kkt_x_bound * (1 + 1e-9) + 1e-12);
  EXPECT_LE(r.result.report.kkt_y, r.result.report.kkt_y_bound * (1 + 1e-9) + 1e-12);
  EXPECT_LE(r.result.report.objective_change, 10 * c.epsilon * (1 + std::abs(r.result.report.objective)));
  EXPECT_TRUE(std::isfinite(r.result.report.max_gamma_norm));
  EXPECT_LE(r.result.report.max_gamma_iter, r.result.report.iterations);
}

TEST(Run, AlgorithmGapModeStopsOnDualStep) {
  LassoConfig c = lasso_config(32, 8, 12);
  c.mode = StopMode::algorithm_gap;
  c.epsilon = 1e-3;
  const LassoRun r = solve_lasso(c);
  const Residuals& f = r.result.report.final_residuals;
  EXPECT_LT(std::max({f.dx, f.dy, f.dgamma}), 1e-3);
}

TEST(Run, AssertionFailureNamesTheCheck) {
  // A prox that does not minimize: the x-step raises the Lagrangian.
  const ProxOracle faulty(
      1, [](std::span<const double> t) { return std::abs(t[0]); },
      [](std::span<const double> v, double, std::span<double> out) { out[0] = v[0] + 1.0; });
  const ProblemSpec spec(SmoothOracle::zero(2), SmoothOracle::zero(1), {faulty}, {Matrix{{1.0}}}, Matrix{{-1.0}},
                         false);
  IterateState s = IterateState::initial(spec, {0.0}, {0.0}, {0.0});
  try {
    run(spec, manual(1.0, 2.0, 1.0), {}, s, opts(DiagLevel::assertions));
    FAIL() << "expected a diagnostic error";
  } catch (const DiagnosticError& e) {
    EXPECT_EQ(e.lemma(), "x-step descent");
    EXPECT_EQ(e.iteration(), 1);
  }
}

TEST(Intprog, ExamplesMatchEnumeration) {
  for (double target : {2.3, 4.9}) {
    IntprogConfig c;
    c.target = target;
    const IntprogRun r = solve_intprog(c, opts(DiagLevel::assertions));
    const double expect = brute_force_argmin(c);
    EXPECT_EQ(r.result.state.x[0], expect) << target;
    EXPECT_NEAR(r.result.state.y[0], expect, 1e-8);
    EXPECT_EQ(r.result.report.termination, Termination::converged);
  }
}

TEST(Intprog, SingletonSet) {
  IntprogConfig c;
  c.lo = c.hi = 3;
  c.target = -4.0;
  const IntprogRun r = solve_intprog(c);
  EXPECT_EQ(r.result.state.x[0], 3.0);
  EXPECT_NEAR(r.result.state.y[0], 3.0, 1e-8);
}

TEST(Intprog, ToyParametersAreUncertified) {
  const IntprogConfig c;
  const Certificate p = intprog_parameters(c, generate_intprog(c));
  EXPECT_FALSE(p.certified);
  EXPECT_EQ(p.beta, 1.0);
  EXPECT_EQ(p.L_x, 2.0);
  EXPECT_EQ(p.L_y, 1.0);
}

TEST(Intprog, InvalidMuIsConfigError) {
  IntprogConfig c;
  c.mu = 0.0;
  EXPECT_THROW(generate_intprog(c), ConfigError);
}
