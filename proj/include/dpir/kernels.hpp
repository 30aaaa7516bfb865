#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dpir/schedule.hpp"

namespace dpir {

// Isotropic Gaussian transition: N(mean, stddev^2 I).
struct GaussianStep {
  Eigen::VectorXd mean;
  double stddev = 0.0;
};

// Coefficients of the closed-form kernel that merges k consecutive reverse
// steps starting at x_t, for a fixed x0 estimate:
//   x_{t-k} ~ N(c_x0 * x0 + c_xt * x_t, var * I).
struct MergedTransitionCoeffs {
  int t = 0;
  int k = 0;
  double c_x0 = 0.0;
  double c_xt = 0.0;
  double var = 0.0;
};

// x0 coefficient of the one-step reverse posterior mean:
// sqrt(abar_{t-1}) beta_t / (1 - abar_t).
double posterior_coef_x0(const NoiseSchedule& s, int t);

// x_t coefficient of the one-step reverse posterior mean:
// sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t).
double posterior_coef_xt(const NoiseSchedule& s, int t);

// Accumulated x-coefficient of the merged kernel running steps i down
// through j: sqrt(prod_{n=j..i} alpha_n) * (1 - abar_{j-1}) / (1 - abar_i)
// for i >= j, and 1 for i < j. The product is formed from prefix sums of
// log(alpha), so long runs do not underflow.
double merged_coef_xt(const NoiseSchedule& s, int i, int j);

// Full merged kernel for k reverse steps from x_t; 1 <= k <= t.
MergedTransitionCoeffs merged_transition(const NoiseSchedule& s, int t, int k);

// Merged coefficients for jumps from any source t down to a fixed target,
// built in one O(T) pass. Used by the accelerated sampler.
class MergedJumpTable {
 public:
  MergedJumpTable(const NoiseSchedule& s, int target);
  int target() const { return target_; }
  // Coefficients for the jump t -> target; t in (target, T].
  const MergedTransitionCoeffs& from(int t) const;

 private:
  int target_;
  std::vector<MergedTransitionCoeffs> coeffs_;
};

// q(x_t | x_0) = N(sqrt(abar_t) x0, (1 - abar_t) I).
GaussianStep forward_marginal(const NoiseSchedule& s,
                              const Eigen::VectorXd& x0, int t);

// One reverse step mean: c_x0 * x0_hat + c_xt * x_t (no noise).
Eigen::VectorXd posterior_step(const NoiseSchedule& s,
                               const Eigen::VectorXd& xt,
                               const Eigen::VectorXd& x0_hat, int t);

// One reverse step with injected standard-normal noise.
Eigen::VectorXd posterior_step(const NoiseSchedule& s,
                               const Eigen::VectorXd& xt,
                               const Eigen::VectorXd& x0_hat, int t,
                               const Eigen::VectorXd& noise);

// Conditional score from an x0 estimate:
// (sqrt(abar_t) x0_hat - x_t) / (1 - abar_t).
Eigen::VectorXd score_from_x0(const NoiseSchedule& s,
                              const Eigen::VectorXd& x0_hat,
                              const Eigen::VectorXd& xt, int t);

// Reverse-step mean from a score value: (x_t + (1 - alpha_t) score) / sqrt(alpha_t).
Eigen::VectorXd mean_from_score(const NoiseSchedule& s,
                                const Eigen::VectorXd& xt,
                                const Eigen::VectorXd& score, int t);

// Deterministic DDIM update (eta = 0) or, with the noise overload, the
// stochastic variant. t_next in 0..t-1; eta in [0, 1].
Eigen::VectorXd ddim_step(const NoiseSchedule& s, const Eigen::VectorXd& xt,
                          const Eigen::VectorXd& x0_hat, int t, int t_next,
                          double eta);

Eigen::VectorXd ddim_step(const NoiseSchedule& s, const Eigen::VectorXd& xt,
                          const Eigen::VectorXd& x0_hat, int t, int t_next,
                          double eta, const Eigen::VectorXd& noise);

// Stddev of the stochastic DDIM step.
double ddim_sigma(const NoiseSchedule& s, int t, int t_next, double eta);

// Header: t,k,c_x0,c_xt,var
void write_merged_coeffs_csv(std::ostream& os, const NoiseSchedule& s,
                             const std::vector<std::pair<int, int>>& tk_pairs);

}  // namespace dpir
