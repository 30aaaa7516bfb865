#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpir/kernels.hpp"
#include "dpir/schedule.hpp"

namespace dpir {

struct CheckResult {
  std::string name;
  bool pass = false;
  double observed = 0.0;  // the error / statistic that was measured
  double bound = 0.0;     // the threshold it must stay under
  std::string detail;
};

struct VerifyReport {
  std::string suite;
  std::vector<CheckResult> checks;
  bool passed() const;
  double max_observed() const;
};

void print_report(std::ostream& os, const VerifyReport& report);

// Independent oracle for the merged kernel: composes k one-step reverse
// transitions x_{j-1} = c0(j) x0 + c1(j) x_j + N(0, sigma_j^2) by explicit
// affine-Gaussian chaining of the single-step coefficients. Shares no code
// with merged_transition / merged_coef_xt.
MergedTransitionCoeffs compose_reverse_steps(const NoiseSchedule& s, int t,
                                             int k);

// Merged kernel equals the step-by-step composition for randomized (t, k)
// pairs under both variance parametrizations (CLI: verify lemma2).
VerifyReport verify_merged_kernel(int T, std::uint64_t seed,
                                  int num_pairs = 200, double tol = 1e-10);

// Conditional score identity on randomized linear-Gaussian worlds
// (CLI: verify lemma1).
VerifyReport verify_score_identity(int num_worlds, std::uint64_t seed,
                                   double tol = 1e-8);

// Back-projection dominance threshold: finite activation tau, the
// inequality's sign pattern around it, and closed forms against Monte
// Carlo (CLI: verify prop1).
VerifyReport verify_restorer_dominance(int num_worlds, std::uint64_t seed,
                                       long mc_draws = 100000);

// E[x^T B x] closed form against Monte Carlo (CLI: verify trace).
VerifyReport verify_trace_identity(int dim, int num_pairs, long mc_draws,
                                   std::uint64_t seed);

// Stochastic DDIM at eta = 1, stride 1 against the ancestral sampler under
// the posterior variance parametrization (CLI: verify ddim).
VerifyReport verify_ddim_equivalence(std::uint64_t seed, long num_runs = 100000,
                                     int tau = 25);

}  // namespace dpir
