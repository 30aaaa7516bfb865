#pragma once

#include <iosfwd>
#include <vector>

namespace dpir {

// Choice of reverse-kernel variance. Beta uses sigma_t^2 = beta_t; TildeBeta
// uses the posterior variance (1 - abar_{t-1}) / (1 - abar_t) * beta_t.
enum class VarianceParam { Beta, TildeBeta };

// Immutable diffusion noise schedule over timesteps t = 1..T, with abar_0 = 1.
//
// The cumulative signal retention abar_t = prod_{s<=t} alpha_s is kept as
// prefix sums of log(alpha) so that partial products alpha_j * ... * alpha_i
// needed by the merged reverse kernels can be formed without underflow; the
// exponentiated values are cached at construction.
class NoiseSchedule {
 public:
  // Linear beta ramp: beta_1 = beta_start rising to beta_T = beta_end.
  // Requires T >= 1 and 0 < beta_start <= beta_end < 1.
  static NoiseSchedule linear(int T, double beta_start, double beta_end,
                              VarianceParam vp = VarianceParam::Beta);

  // Explicit betas, each in (0, 1]. A final beta of exactly 1 is permitted so
  // that synthetic schedules can pin abar_T = 0 (absorbing end state).
  static NoiseSchedule from_betas(std::vector<double> betas,
                                  VarianceParam vp = VarianceParam::Beta);

  int steps() const { return T_; }
  VarianceParam variance_param() const { return vp_; }

  double beta(int t) const;           // t in 1..T
  double alpha(int t) const;          // 1 - beta_t
  double log_alpha(int t) const;      // ln alpha_t
  double alpha_bar(int t) const;      // t in 0..T, abar_0 = 1
  double log_alpha_bar(int t) const;  // prefix sum of ln alpha

  // Stddev of x_t / sqrt(abar_t) around x_0: sqrt((1 - abar_t) / abar_t).
  double tilde_sigma(int t) const;
  double tilde_sigma2(int t) const;

  // Reverse-kernel variance sigma_t^2 under this schedule's VarianceParam.
  double reverse_sigma2(int t) const;

  // Header: t,beta,alpha,alpha_bar,tilde_sigma,reverse_sigma2
  void write_csv(std::ostream& os) const;

 private:
  NoiseSchedule(std::vector<double> betas, VarianceParam vp);
  void check_t(int t, int lo) const;

  int T_;
  VarianceParam vp_;
  std::vector<double> betas_;          // [0] unused
  std::vector<double> log_alphas_;     // [0] unused
  std::vector<double> log_alpha_bar_;  // [0] = 0
  std::vector<double> alpha_bar_;      // exp of the above, cached
};

}  // namespace dpir
