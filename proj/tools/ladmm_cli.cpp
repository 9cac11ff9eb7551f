// Command-line driver: LASSO experiment, integer-programming toy, parameter check.
//
// Exit codes: 0 converged / certified, 1 parameters not certified (check-params),
// 2 iteration cap, 3 configuration error, 4 runtime invariant failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ladmm/ladmm.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUncertified = 1;
constexpr int kExitCap = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInvariant = 4;

constexpr const char* kVersion = "ladmm 1.0.0";

struct ManualParams {
  std::optional<double> beta, lx, ly;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--beta", beta, "penalty parameter (with --lx and --ly)");
    cmd->add_option("--lx", lx, "x linearization constant");
    cmd->add_option("--ly", ly, "y linearization constant");
  }
  bool any() const { return beta || lx || ly; }
  bool all() const { return beta && lx && ly; }
};

ladmm::DiagLevel parse_diag(const std::string& s) {
  if (s == "off") return ladmm::DiagLevel::off;
  if (s == "trace") return ladmm::DiagLevel::trace;
  return ladmm::DiagLevel::assertions;
}

ladmm::StopMode parse_mode(const std::string& s) {
  return s == "alg" ? ladmm::StopMode::algorithm_gap : ladmm::StopMode::experiment_gap;
}

std::filesystem::path report_path(const std::filesystem::path& trace) {
  std::filesystem::path p = trace;
  return p.replace_extension(".report.json");
}

int finish(ladmm::RunReport report, const std::string& out, double seconds, bool timed) {
  if (!out.empty()) {
    report.trace_path = out;
    std::ofstream rep(report_path(out));
    if (!rep) throw ladmm::ConfigError("cannot write " + report_path(out).string());
    rep << ladmm::to_json(report).dump(2) << '\n';
  }
  std::cout << ladmm::to_json(report).dump(2) << '\n';
  if (timed) std::cerr << "elapsed " << seconds << " s\n";
  return report.termination == ladmm::Termination::converged ? kExitOk : kExitCap;
}

// Runs `solve` with a trace sink attached when a trace file is requested.
template <typename Solve>
int run_with_trace(Solve&& solve, ladmm::DiagLevel diag, const std::string& out, bool timed) {
  ladmm::RunOptions options;
  options.diag = diag;
  options.threads = ladmm::threads_from_env();
  std::ofstream file;
  std::optional<ladmm::TraceWriter> writer;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw ladmm::ConfigError("cannot write " + out);
    writer.emplace(file);
    if (options.diag == ladmm::DiagLevel::off) options.diag = ladmm::DiagLevel::trace;
    options.sink = [&](const ladmm::DiagnosticsRecord& d) { (*writer)(d); };
  }
  const auto t0 = std::chrono::steady_clock::now();
  ladmm::RunReport report = solve(options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  file.close();
  return finish(std::move(report), out, seconds, timed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linearized ADMM for linearly constrained nonconvex problems"};
  app.require_subcommand(1);

  // lasso
  ladmm::LassoConfig lasso;
  ManualParams lasso_manual;
  std::string lasso_params = "auto", lasso_mode = "exp", lasso_diag = "off";
  bool lasso_time = false;
  auto* cmd_lasso = app.add_subcommand("lasso", "nonconvex regularized LASSO on a Gaussian instance");
  cmd_lasso->add_option("--n", lasso.N, "number of unknowns")->capture_default_str();
  cmd_lasso->add_option("--m", lasso.M, "number of measurements")->capture_default_str();
  cmd_lasso->add_option("--lambda", lasso.lambda)->capture_default_str();
  cmd_lasso->add_option("--eta", lasso.eta)->capture_default_str();
  cmd_lasso->add_option("--seed", lasso.seed)->capture_default_str();
  cmd_lasso->add_option("--blocks", lasso.K, "x blocks (must divide n)")->capture_default_str();
  cmd_lasso->add_option("--eps", lasso.epsilon)->capture_default_str();
  cmd_lasso->add_option("--max-iters", lasso.max_iters)->capture_default_str();
  cmd_lasso->add_option("--params", lasso_params)->check(CLI::IsMember({"auto"}))->capture_default_str();
  lasso_manual.add_to(cmd_lasso);
  cmd_lasso->add_option("--mode", lasso_mode)->check(CLI::IsMember({"alg", "exp"}))->capture_default_str();
  cmd_lasso->add_option("--diag", lasso_diag)->check(CLI::IsMember({"off", "trace", "assert"}))->capture_default_str();
  cmd_lasso->add_option("--out", lasso.out_path, "trace CSV; the report goes next to it as .report.json");
  cmd_lasso->add_flag("--time", lasso_time, "print elapsed wall time to stderr");

  // intprog
  ladmm::IntprogConfig ip;
  ManualParams ip_manual;
  std::string ip_set = "0..5", ip_params = "toy", ip_mode = "exp", ip_diag = "off", ip_out;
  bool ip_time = false;
  auto* cmd_ip = app.add_subcommand("intprog", "quadratic target over an integer range");
  cmd_ip->add_option("--set", ip_set, "integer range LO..HI")->capture_default_str();
  cmd_ip->add_option("--target", ip.target, "c in a (t - c)^2")->capture_default_str();
  cmd_ip->add_option("--curvature", ip.curvature, "a in a (t - c)^2")->capture_default_str();
  cmd_ip->add_option("--dim", ip.dim)->capture_default_str();
  cmd_ip->add_option("--mu", ip.mu, "weight of the (mu/2)||.||^2 split")->capture_default_str();
  cmd_ip->add_option("--seed", ip.seed)->capture_default_str();
  cmd_ip->add_option("--params", ip_params)->check(CLI::IsMember({"toy", "auto"}))->capture_default_str();
  ip_manual.add_to(cmd_ip);
  cmd_ip->add_option("--eps", ip.epsilon)->capture_default_str();
  cmd_ip->add_option("--max-iters", ip.max_iters)->capture_default_str();
  cmd_ip->add_option("--mode", ip_mode)->check(CLI::IsMember({"alg", "exp"}))->capture_default_str();
  cmd_ip->add_option("--diag", ip_diag)->check(CLI::IsMember({"off", "trace", "assert"}))->capture_default_str();
  cmd_ip->add_option("--out", ip_out, "trace CSV");
  cmd_ip->add_flag("--time", ip_time);

  // check-params
  double lg = 0.0, lh = 2.0, la = 1.0, lbb = 1.0;
  ManualParams cp_manual;
  auto* cmd_cp = app.add_subcommand("check-params", "derive or validate parameters, print the certificate");
  cmd_cp->add_option("--lg", lg, "Lipschitz constant of grad g")->capture_default_str();
  cmd_cp->add_option("--lh", lh, "Lipschitz constant of grad h")->capture_default_str();
  cmd_cp->add_option("--la", la, "largest eigenvalue of A^T A")->capture_default_str();
  cmd_cp->add_option("--lbb", lbb, "smallest eigenvalue of B^T B")->capture_default_str();
  cp_manual.add_to(cmd_cp);

  auto* cmd_version = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*cmd_version) {
      std::cout << kVersion << '\n';
      return kExitOk;
    }

    if (*cmd_cp) {
      if (cp_manual.any() && !cp_manual.all()) throw ladmm::ConfigError("--beta, --lx and --ly go together");
      ladmm::SpectralConstants k;
      k.L_A = la;
      k.lambda_BB = lbb;
      k.L_w = lg + lh;
      const ladmm::Certificate c = cp_manual.all()
                                       ? ladmm::validate_parameters(*cp_manual.beta, *cp_manual.lx, *cp_manual.ly, k, lg, lh)
                                       : ladmm::derive_parameters(k, lg, lh);
      std::cout << ladmm::to_json(c).dump(2) << '\n';
      return c.certified ? kExitOk : kExitUncertified;
    }

    if (*cmd_lasso) {
      if (lasso_manual.any()) {
        if (!lasso_manual.all()) throw ladmm::ConfigError("--beta, --lx and --ly go together");
        lasso.params = ladmm::ParamRule::manual;
        lasso.beta = *lasso_manual.beta;
        lasso.L_x = *lasso_manual.lx;
        lasso.L_y = *lasso_manual.ly;
      }
      lasso.mode = parse_mode(lasso_mode);
      lasso.validate();
      return run_with_trace(
          [&](const ladmm::RunOptions& o) { return ladmm::solve_lasso(lasso, o).result.report; },
          parse_diag(lasso_diag), lasso.out_path, lasso_time);
    }

    if (*cmd_ip) {
      const auto dots = ip_set.find("..");
      if (dots == std::string::npos) throw ladmm::ConfigError("--set expects LO..HI");
      try {
        ip.lo = std::stol(ip_set.substr(0, dots));
        ip.hi = std::stol(ip_set.substr(dots + 2));
      } catch (const std::logic_error&) {
        throw ladmm::ConfigError("--set expects LO..HI");
      }
      if (ip_manual.any()) {
        if (!ip_manual.all()) throw ladmm::ConfigError("--beta, --lx and --ly go together");
        ip.params = ladmm::ParamRule::manual;
        ip.beta = *ip_manual.beta;
        ip.L_x = *ip_manual.lx;
        ip.L_y = *ip_manual.ly;
      } else {
        ip.params = ip_params == "auto" ? ladmm::ParamRule::derived : ladmm::ParamRule::toy;
      }
      ip.mode = parse_mode(ip_mode);
      ip.validate();
      return run_with_trace(
          [&](const ladmm::RunOptions& o) {
            auto r = ladmm::solve_intprog(ip, o);
            std::cerr << "x =";
            for (double v : r.result.state.x) std::cerr << ' ' << v;
            std::cerr << "\ny =";
            for (double v : r.result.state.y) std::cerr << ' ' << v;
            std::cerr << '\n';
            return r.result.report;
          },
          parse_diag(ip_diag), ip_out, ip_time);
    }
  } catch (const ladmm::DiagnosticError& e) {
    std::cerr << "invariant failure: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const ladmm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const ladmm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
