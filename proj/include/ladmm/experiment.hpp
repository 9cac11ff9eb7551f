#pragma once

// Instance generators for the two shipped problem families, the trace CSV
// writer and JSON (de)serialization of reports and certificates.
//
// LASSO:   min  lambda sum_j F(x_j) + ||y - b||^2   s.t.  A x - y = 0
// intprog: min  tau_M(x) + [f(x) - (mu/2)||x||^2] + (mu/2)||y||^2   s.t.  x - y = 0
//          with f(t) = a ||t - c||^2 and tau_M the indicator of M^d.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ladmm/certify.hpp"
#include "ladmm/core_model.hpp"
#include "ladmm/error.hpp"
#include "ladmm/linalg.hpp"
#include "ladmm/prox_lib.hpp"
#include "ladmm/random.hpp"
#include "ladmm/solver.hpp"

namespace ladmm {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// LADMM_THREADS, or 0 (all hardware threads) when unset.
inline int threads_from_env() {
  const char* s = std::getenv("LADMM_THREADS");
  if (s == nullptr || *s == '\0') return 0;
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s, s + std::char_traits<char>::length(s), v);
  if (ec != std::errc{} || *ptr != '\0' || v < 0) throw ConfigError("LADMM_THREADS must be a nonnegative integer");
  return v;
}

enum class ParamRule {
  derived,  // smallest parameters satisfying the certified rule
  manual,   // user-supplied beta, L_x, L_y (validated, possibly uncertified)
  toy,      // intprog only: beta = L_y = mu, L_x = 2a
};

// ---------------------------------------------------------------------------
// LASSO

struct LassoConfig {
  std::size_t N = 1024;
  std::size_t M = 256;
  double lambda = 0.1;
  double eta = 0.1;
  std::uint64_t seed = 1;
  std::size_t K = 1;
  ParamRule params = ParamRule::derived;
  double beta = 0.0, L_x = 0.0, L_y = 0.0;  // manual only
  double epsilon = 1e-4;
  long max_iters = 1'000'000;
  StopMode mode = StopMode::experiment_gap;
  std::string out_path;

  void validate() const {
    if (N == 0 || M == 0) throw ConfigError("N and M must be positive");
    if (K == 0 || N % K != 0) throw ConfigError("block count K must divide N");
    if (!(lambda > 0.0) || !(eta > 0.0)) throw ConfigError("lambda and eta must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (max_iters < 1) throw ConfigError("max_iters must be positive");
    if (params == ParamRule::toy) throw ConfigError("the toy parameter rule applies to intprog only");
    if (params == ParamRule::manual && !(beta > 0.0 && L_x > 0.0 && L_y > 0.0))
      throw ConfigError("manual parameters need positive beta, L_x and L_y");
  }
};

struct LassoInstance {
  ProblemSpec spec;
  Matrix A;      // after scaling
  Vector b;
  double sigma;  // top eigenvalue of A A^T before scaling
};

inline constexpr const char* kLassoGenerator = "lasso/splitmix64-box-muller";
inline constexpr const char* kIntprogGenerator = "intprog/quadratic";

/// Draws A (row-major) then b from one normal stream, scales A so the top
/// eigenvalue of A A^T is 1.
inline LassoInstance generate_lasso(const LassoConfig& config) {
  config.validate();
  GaussianStream normal(config.seed);
  Matrix a(config.M, config.N);
  for (std::size_t r = 0; r < config.M; ++r)
    for (std::size_t c = 0; c < config.N; ++c) a(r, c) = normal.next();
  Vector b(config.M);
  for (auto& v : b) v = normal.next();

  const double sigma = top_eigenvalue_gram(a.transposed());
  a *= 1.0 / std::sqrt(sigma);

  const ClippedQuadPenalty penalty{config.lambda, config.eta};
  const std::size_t width = config.N / config.K;
  std::vector<ProxOracle> f;
  for (std::size_t i = 0; i < config.K; ++i) f.push_back(clipped_quad_oracle(penalty, width));
  ProblemSpec spec = ProblemSpec::from_stacked(SmoothOracle::zero(config.N + config.M),
                                               SmoothOracle::squared_distance(b), std::move(f), a,
                                               Matrix::identity(config.M, -1.0), true);
  return {std::move(spec), std::move(a), std::move(b), sigma};
}

inline Certificate lasso_parameters(const LassoConfig& config, const ProblemSpec& spec) {
  const SpectralConstants k = compute_spectral_constants(spec);
  const double l_g = spec.g().lipschitz_constant();
  const double l_h = spec.h().lipschitz_constant();
  if (config.params == ParamRule::manual) return validate_parameters(config.beta, config.L_x, config.L_y, k, l_g, l_h);
  return derive_parameters(k, l_g, l_h);
}

inline std::vector<std::pair<std::string, std::string>> config_echo(const LassoConfig& c) {
  std::vector<std::pair<std::string, std::string>> e = {
      {"N", std::to_string(c.N)},
      {"M", std::to_string(c.M)},
      {"lambda", format_double(c.lambda)},
      {"eta", format_double(c.eta)},
      {"K", std::to_string(c.K)},
      {"params", c.params == ParamRule::manual ? "manual" : "derived"},
      {"epsilon", format_double(c.epsilon)},
      {"max_iters", std::to_string(c.max_iters)},
      {"mode", c.mode == StopMode::algorithm_gap ? "alg" : "exp"},
  };
  if (c.params == ParamRule::manual) {
    e.emplace_back("beta", format_double(c.beta));
    e.emplace_back("L_x", format_double(c.L_x));
    e.emplace_back("L_y", format_double(c.L_y));
  }
  return e;
}

struct LassoRun {
  LassoInstance instance;
  Certificate params;
  RunResult result;
};

/// Generates the instance, picks parameters, runs from zero.
inline LassoRun solve_lasso(const LassoConfig& config, const RunOptions& options = {}) {
  LassoInstance inst = generate_lasso(config);
  Certificate params = lasso_parameters(config, inst.spec);
  const StoppingRule stop{config.epsilon, config.mode, config.max_iters};
  RunResult result = run(inst.spec, params, stop, IterateState::zeros(inst.spec), options);
  result.report.generator = kLassoGenerator;
  result.report.seed = config.seed;
  result.report.config = config_echo(config);
  result.report.trace_path = config.out_path;
  return {std::move(inst), std::move(params), std::move(result)};
}

// ---------------------------------------------------------------------------
// Integer programming toy

struct IntprogConfig {
  long lo = 0;
  long hi = 5;
  std::size_t dim = 1;
  double curvature = 1.0;  // a
  double target = 2.3;     // c
  double mu = 1.0;
  std::uint64_t seed = 0;  // recorded only; the instance is fully determined by (a, c, M)
  ParamRule params = ParamRule::toy;
  double beta = 0.0, L_x = 0.0, L_y = 0.0;
  double epsilon = 1e-10;
  long max_iters = 100'000;
  StopMode mode = StopMode::experiment_gap;

  void validate() const {
    if (hi < lo) throw ConfigError("integer set is empty");
    if (dim == 0) throw ConfigError("dimension must be positive");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be positive and finite");
    if (!(curvature > 0.0) || !std::isfinite(curvature)) throw ConfigError("curvature must be positive and finite");
    if (!std::isfinite(target)) throw ConfigError("target must be finite");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (max_iters < 1) throw ConfigError("max_iters must be positive");
    if (params == ParamRule::manual && !(beta > 0.0 && L_x > 0.0 && L_y > 0.0))
      throw ConfigError("manual parameters need positive beta, L_x and L_y");
  }
};

inline ProblemSpec generate_intprog(const IntprogConfig& config) {
  config.validate();
  const std::size_t d = config.dim;
  const double a = config.curvature;
  const double c = config.target;
  const double mu = config.mu;
  // g(x, y) = a ||x - c||^2 - (mu/2) ||x||^2, independent of y.
  SmoothOracle g(
      2 * d,
      [d, a, c, mu](std::span<const double> z) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += a * (z[i] - c) * (z[i] - c) - 0.5 * mu * z[i] * z[i];
        return s;
      },
      [d, a, c, mu](std::span<const double> z, std::span<double> out) {
        for (std::size_t i = 0; i < d; ++i) out[i] = 2.0 * a * (z[i] - c) - mu * z[i];
        for (std::size_t i = d; i < 2 * d; ++i) out[i] = 0.0;
      },
      std::abs(2.0 * a - mu));
  SmoothOracle h = SmoothOracle::squared_distance(Vector(d, 0.0), 0.5 * mu);
  std::vector<ProxOracle> f;
  f.push_back(finite_set_oracle(FiniteSetIndicator::integer_range(config.lo, config.hi), d));
  return ProblemSpec::from_stacked(std::move(g), std::move(h), std::move(f), Matrix::identity(d),
                                   Matrix::identity(d, -1.0), true);
}

/// The toy rule beta = L_y = mu, L_x = 2a makes the x-step a projection of
/// c + (mu y - gamma) / (2a). The certified rule is valid but its large L_x
/// freezes x at any point of M.
inline Certificate intprog_parameters(const IntprogConfig& config, const ProblemSpec& spec) {
  const SpectralConstants k = compute_spectral_constants(spec);
  const double l_g = spec.g().lipschitz_constant();
  const double l_h = spec.h().lipschitz_constant();
  switch (config.params) {
    case ParamRule::derived: return derive_parameters(k, l_g, l_h);
    case ParamRule::manual: return validate_parameters(config.beta, config.L_x, config.L_y, k, l_g, l_h);
    case ParamRule::toy: break;
  }
  return validate_parameters(config.mu, 2.0 * config.curvature, config.mu, k, l_g, l_h);
}

inline std::vector<std::pair<std::string, std::string>> config_echo(const IntprogConfig& c) {
  const char* rule = c.params == ParamRule::toy ? "toy" : c.params == ParamRule::manual ? "manual" : "derived";
  std::vector<std::pair<std::string, std::string>> e = {
      {"set", std::to_string(c.lo) + ".." + std::to_string(c.hi)},
      {"dim", std::to_string(c.dim)},
      {"curvature", format_double(c.curvature)},
      {"target", format_double(c.target)},
      {"mu", format_double(c.mu)},
      {"params", rule},
      {"epsilon", format_double(c.epsilon)},
      {"max_iters", std::to_string(c.max_iters)},
      {"mode", c.mode == StopMode::algorithm_gap ? "alg" : "exp"},
  };
  if (c.params == ParamRule::manual) {
    e.emplace_back("beta", format_double(c.beta));
    e.emplace_back("L_x", format_double(c.L_x));
    e.emplace_back("L_y", format_double(c.L_y));
  }
  return e;
}

struct IntprogRun {
  Certificate params;
  RunResult result;
};

inline IntprogRun solve_intprog(const IntprogConfig& config, const RunOptions& options = {}) {
  const ProblemSpec spec = generate_intprog(config);
  Certificate params = intprog_parameters(config, spec);
  const StoppingRule stop{config.epsilon, config.mode, config.max_iters};
  RunResult result = run(spec, params, stop, IterateState::zeros(spec), options);
  result.report.generator = kIntprogGenerator;
  result.report.seed = config.seed;
  result.report.config = config_echo(config);
  return {std::move(params), std::move(result)};
}

// ---------------------------------------------------------------------------
// Trace CSV

inline constexpr const char* kTraceHeader =
    "iter,L_beta,m_k,objective,dx,dy,dgamma,feas,kkt_x,kkt_y,slack_x,slack_y,slack_gamma";

class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out) : out_(out) { out_ << kTraceHeader << '\n'; }

  void operator()(const DiagnosticsRecord& d) {
    out_ << d.iter;
    for (double v : {d.L_beta, d.m_k, d.objective, d.dx, d.dy, d.dgamma, d.feas, d.kkt_x, d.kkt_y, d.slack_x,
                     d.slack_y, d.slack_gamma})
      out_ << ',' << format_double(v);
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

// JSON has no inf/nan; those go out as strings.
inline nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError("not a number: " + s);
}

}  // namespace detail

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json config = nlohmann::json::array();
  for (const auto& [k, v] : r.config) config.push_back({k, v});
  return {
      {"termination", to_string(r.termination)},
      {"iterations", r.iterations},
      {"dx", detail::number(r.final_residuals.dx)},
      {"dy", detail::number(r.final_residuals.dy)},
      {"dgamma", detail::number(r.final_residuals.dgamma)},
      {"feas", detail::number(r.final_residuals.feas)},
      {"kkt_x", detail::number(r.kkt_x)},
      {"kkt_y", detail::number(r.kkt_y)},
      {"objective", detail::number(r.objective)},
      {"L_beta", detail::number(r.L_beta)},
      {"certified", r.certified},
      {"kkt_x_bound", detail::number(r.kkt_x_bound)},
      {"kkt_y_bound", detail::number(r.kkt_y_bound)},
      {"stationarity_bounds_hold", r.stationarity_bounds_hold},
      {"max_gamma_norm", detail::number(r.max_gamma_norm)},
      {"max_gamma_iter", r.max_gamma_iter},
      {"objective_change", detail::number(r.objective_change)},
      {"trace_path", r.trace_path},
      {"generator", r.generator},
      {"seed", r.seed},
      {"config", std::move(config)},
  };
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  const auto t = j.at("termination").get<std::string>();
  if (t == "converged") r.termination = Termination::converged;
  else if (t == "iteration_cap") r.termination = Termination::iteration_cap;
  else throw ConfigError("unknown termination: " + t);
  r.iterations = j.at("iterations").get<long>();
  r.final_residuals = {detail::number(j.at("dx")), detail::number(j.at("dy")), detail::number(j.at("dgamma")),
                       detail::number(j.at("feas"))};
  r.kkt_x = detail::number(j.at("kkt_x"));
  r.kkt_y = detail::number(j.at("kkt_y"));
  r.objective = detail::number(j.at("objective"));
  r.L_beta = detail::number(j.at("L_beta"));
  r.certified = j.at("certified").get<bool>();
  r.kkt_x_bound = detail::number(j.at("kkt_x_bound"));
  r.kkt_y_bound = detail::number(j.at("kkt_y_bound"));
  r.stationarity_bounds_hold = j.at("stationarity_bounds_hold").get<bool>();
  r.max_gamma_norm = detail::number(j.at("max_gamma_norm"));
  r.max_gamma_iter = j.at("max_gamma_iter").get<long>();
  r.objective_change = detail::number(j.at("objective_change"));
  r.trace_path = j.at("trace_path").get<std::string>();
  r.generator = j.at("generator").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& kv : j.at("config")) r.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  return r;
}

inline nlohmann::json to_json(const Certificate& c) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : c.violations)
    violations.push_back({{"name", v.name}, {"lhs", detail::number(v.lhs)}, {"rhs", detail::number(v.rhs)}});
  return {
      {"beta", c.beta},   {"L_x", c.L_x},     {"L_y", c.L_y},
      {"C_m", c.C_m},     {"C_0", c.C_0},     {"C_1", c.C_1},
      {"C_2", c.C_2},     {"C_3", c.C_3},     {"C_4", c.C_4},
      {"L_g", c.L_g},     {"L_h", c.L_h},     {"L_w", c.constants.L_w},
      {"L_A", c.constants.L_A},               {"lambda_BB", c.constants.lambda_BB},
      {"certified", c.certified},             {"violations", std::move(violations)},
  };
}

}  // namespace ladmm
