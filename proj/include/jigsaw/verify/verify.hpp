#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jigsaw/oracle/oracle.hpp"
#include "jigsaw/spb/spb.hpp"

namespace jigsaw::verify {

struct VerifyOptions {
  int k = 4;
  int B = 64;
  int trials = 10000;
  int sgd_iterations = 5000;
  std::uint64_t seed = 1;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// The standard verification model: an 8-block quadratic evaluated one unit
// away from its optimum, so single-sample gradients have nonzero noise.
struct QuadraticFixture {
  std::unique_ptr<spb::BlockQuadratic> model;
  spb::Params x_eval;  // distance 1 from the optimum
};
QuadraticFixture make_fixture(std::uint64_t seed);

// Gradient-noise measurements against the paper bounds at one (k, B).
struct VarianceCheck {
  int k = 0;
  int B = 0;
  double P = 0.0;                      // measured per-sample gradient-norm bound
  spb::VarianceEstimate est;           // spb_core estimator
  oracle::OracleVariance oracle_est;   // independent estimator
  double lemma1_bound = 0.0;           // 2 P^2 k / B
  double theorem2_bound = 0.0;         // 2 P^2 (k/B) log2(k), k >= 2
};
VarianceCheck run_variance_check(int k, int B, int trials, std::uint64_t seed);

// One Theorem-1 run with measured constants and post-hoc premise checks.
struct ConvergenceCheck {
  int k = 0;
  int iterations = 0;
  double R = 0.0;     // diameter of the domain the run is expected to stay in
  double V = 0.0;     // noise bound used by the schedule
  double beta = 0.0;
  double realized_subopt = 0.0;  // f(xbar_t) - f(x*)
  double bound = 0.0;            // R*sqrt(2 V^2 / t) + beta R^2 / t
  double max_dist_to_opt = 0.0;  // max_s ||x_{s+1} - x*||, premise: <= R/2
  double max_traj_variance = 0.0;  // max_s exact noise at x_{s+1}, premise: <= V^2
  std::vector<double> avg_subopt;  // f(xbar_s) - f* trace

  bool premises_ok() const;
  bool bound_ok() const { return premises_ok() && realized_subopt <= bound; }
};
ConvergenceCheck run_convergence_check(int k, int iterations, std::uint64_t seed);

// First iteration s with f(xbar_s) - f* <= target (1-based); iterations+1 if
// never reached.
int iterations_to_target(const ConvergenceCheck& check, double target);

// The full cmd-verify suite; every entry prints one pass/fail line.
std::vector<CheckResult> run_verify_suite(const VerifyOptions& opts);

}  // namespace jigsaw::verify
