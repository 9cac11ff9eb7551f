#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "ladmm/ladmm.hpp"
#include "oracles.hpp"

using namespace ladmm;

namespace {

LassoConfig small(std::uint64_t seed, std::size_t k = 1) {
  LassoConfig c;
  c.N = 4;
  c.M = 2;
  c.seed = seed;
  c.K = k;
  return c;
}

}  // namespace

TEST(Random, SplitMixMatchesReference) {
  SplitMix64 a(42);
  oracle::ReferenceNormals ref{42};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), ref.splitmix());
}

TEST(Random, SplitMixKnownValues) {
  // First outputs for seed 0 as published with the algorithm.
  SplitMix64 a(0);
  EXPECT_EQ(a.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(a.next(), 0x6E789E6AA1B965F4ULL);
}

TEST(Random, UniformInHalfOpenUnitInterval) {
  SplitMix64 a(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = a.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
}

TEST(Random, GaussianMatchesReference) {
  GaussianStream g(42);
  oracle::ReferenceNormals ref{42};
  for (int i = 0; i < 101; ++i) EXPECT_EQ(g.next(), ref());
}

TEST(GenerateLasso, FirstNormalMatchesReference) {
  // Seed 42, N = 4, M = 2: A(0, 0) is the first normal, scaled by 1 / sqrt(sigma).
  const LassoInstance inst = generate_lasso(small(42));
  oracle::ReferenceNormals ref{42};
  oracle::Dense a(2, std::vector<double>(4));
  for (auto& row : a)
    for (auto& v : row) v = ref();
  std::vector<double> b{ref(), ref()};
  oracle::Dense aat(2, std::vector<double>(2, 0.0));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k) aat[i][j] += a[i][k] * a[j][k];
  const double sigma = oracle::jacobi_eigenvalues(aat).back();
  EXPECT_NEAR(inst.sigma, sigma, 1e-10 * sigma);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(inst.A(r, c), a[r][c] / std::sqrt(sigma), 1e-10);
  EXPECT_EQ(inst.b, b);
}

TEST(GenerateLasso, NormalizedTopEigenvalue) {
  for (std::uint64_t seed : {1, 2, 3}) {
    LassoConfig c = small(seed);
    c.N = 40;
    c.M = 12;
    const LassoInstance inst = generate_lasso(c);
    EXPECT_NEAR(top_eigenvalue_gram(inst.A.transposed()), 1.0, 1e-8);
  }
}

TEST(GenerateLasso, Deterministic) {
  const LassoInstance a = generate_lasso(small(9)), b = generate_lasso(small(9));
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.b, b.b);
  EXPECT_NE(generate_lasso(small(10)).b, a.b);
}

TEST(GenerateLasso, BlockCountDoesNotChangeData) {
  LassoConfig c = small(5);
  c.N = 24;
  c.M = 6;
  const LassoInstance one = generate_lasso(c);
  c.K = 8;
  const LassoInstance eight = generate_lasso(c);
  EXPECT_EQ(one.A, eight.A);
  EXPECT_EQ(one.b, eight.b);
  EXPECT_EQ(eight.spec.block_count(), 8u);
}

TEST(GenerateLasso, ProblemStructure) {
  const LassoInstance inst = generate_lasso(small(3));
  EXPECT_TRUE(inst.spec.g().is_zero());
  EXPECT_EQ(inst.spec.h().lipschitz_constant(), 2.0);
  EXPECT_EQ(inst.spec.B(), Matrix::identity(2, -1.0));
  EXPECT_TRUE(inst.spec.coercive_attested());
  // h(y) = ||y - b||^2 without a factor 1/2
  EXPECT_DOUBLE_EQ(inst.spec.h().value(Vector{inst.b[0] + 1.0, inst.b[1]}), 1.0);
}

TEST(GenerateLasso, ConfigErrors) {
  EXPECT_THROW(generate_lasso(small(1, 3)), ConfigError);
  LassoConfig c = small(1);
  c.epsilon = 0.0;
  EXPECT_THROW(generate_lasso(c), ConfigError);
  c = small(1);
  c.params = ParamRule::manual;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 243.0, 5e-324}) {
    const std::string s = format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
}

TEST(Trace, HeaderAndRows) {
  std::ostringstream out;
  TraceWriter w(out);
  DiagnosticsRecord d;
  d.iter = 3;
  d.L_beta = 0.1;
  d.slack_gamma = -1.0 / 3.0;
  w(d);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "iter,L_beta,m_k,objective,dx,dy,dgamma,feas,kkt_x,kkt_y,slack_x,slack_y,slack_gamma");
  std::vector<std::string> cells;
  std::stringstream ss(row);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  ASSERT_EQ(cells.size(), 13u);
  EXPECT_EQ(cells[0], "3");
  EXPECT_EQ(std::strtod(cells[1].c_str(), nullptr), 0.1);
  EXPECT_EQ(std::strtod(cells[12].c_str(), nullptr), -1.0 / 3.0);
}

TEST(Report, JsonRoundTrip) {
  LassoConfig c = small(4);
  c.N = 16;
  c.M = 8;
  c.max_iters = 30;
  const RunReport r = solve_lasso(c).result.report;
  const auto text = to_json(r).dump();
  const RunReport back = report_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, r);
  EXPECT_EQ(back.generator, kLassoGenerator);
  EXPECT_EQ(back.seed, 4u);
}

TEST(Report, NonFiniteValuesSurvive) {
  RunReport r;
  r.objective = kInfinity;
  r.kkt_x = -kInfinity;
  r.seed = 0xFFFFFFFFFFFFFFFFULL;
  r.config = {{"b", "1"}, {"a", "2"}};
  const RunReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back, r);
}

TEST(Certificate, JsonCarriesViolations) {
  const Certificate c = validate_parameters(12, 37, 8, {1, 1, 2, 1}, 0, 2);
  const auto j = to_json(c);
  EXPECT_FALSE(j.at("certified").get<bool>());
  bool found = false;
  for (const auto& v : j.at("violations"))
    if (v.at("name") == kBoundBeta3) found = true;
  EXPECT_TRUE(found);
}

TEST(Threads, EnvironmentVariable) {
  ::unsetenv("LADMM_THREADS");
  EXPECT_EQ(threads_from_env(), 0);
  ::setenv("LADMM_THREADS", "3", 1);
  EXPECT_EQ(threads_from_env(), 3);
  ::setenv("LADMM_THREADS", "x", 1);
  EXPECT_THROW(threads_from_env(), ConfigError);
  ::unsetenv("LADMM_THREADS");
}
