#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "dpir/schedule.hpp"

namespace dpir {

// Linear-Gaussian testbed: x0 ~ N(mu0, Sigma0), observed through
// y = A x0 + n with n ~ N(0, sigma_y^2 I). Every conditional expectation,
// score, and MSE quantity the samplers rely on is available in closed form,
// which makes this world the ground truth for all verification suites.
struct LinearGaussianWorld {
  Eigen::VectorXd mu0;
  Eigen::MatrixXd Sigma0;
  Eigen::MatrixXd A;
  double sigma_y = 1.0;
  std::uint64_t seed = 0;  // provenance only; 0 for hand-built worlds

  Eigen::Index signal_dim() const { return mu0.size(); }
  Eigen::Index obs_dim() const { return A.rows(); }
};

// Validates shape, SPD prior covariance, spectral norm of A <= 1 and
// sigma_y in (0, 1]. The norm bounds can be lifted with allow_out_of_range
// (needed for deliberately out-of-regime experiments).
LinearGaussianWorld make_validated_world(Eigen::VectorXd mu0,
                                         Eigen::MatrixXd Sigma0,
                                         Eigen::MatrixXd A, double sigma_y,
                                         bool allow_out_of_range = false,
                                         std::uint64_t seed = 0);

// Random instance: A rescaled so its spectral norm equals spectral_cap,
// Sigma0 with eigenvalues uniform in [0.1, 2], mu0 standard normal.
// Deterministic under seed.
LinearGaussianWorld make_world(int N, int M, std::uint64_t seed,
                               double spectral_cap = 0.9,
                               bool allow_out_of_range = false);

double spectral_norm(const Eigen::MatrixXd& A);

struct GaussianDist {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Posterior of x0 given y.
GaussianDist cond_x0_given_y(const LinearGaussianWorld& w,
                             const Eigen::VectorXd& y);

// Posterior of x0 given x_tilde = x0 + sigma_tilde * eps (the rescaled
// latent); this is the form the Gaussian denoiser consumes.
GaussianDist cond_x0_given_xtilde(const LinearGaussianWorld& w,
                                  const Eigen::VectorXd& x_tilde,
                                  double sigma_tilde);

// Posterior of x0 given x_t = sqrt(abar_t) x0 + eps.
GaussianDist cond_x0_given_xt(const LinearGaussianWorld& w,
                              const NoiseSchedule& s,
                              const Eigen::VectorXd& xt, int t);

// Posterior of x0 given the stacked observation (y; x_t).
GaussianDist cond_x0_given_y_xt(const LinearGaussianWorld& w,
                                const NoiseSchedule& s,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& xt, int t);

// Score of p(x_t | y) at xt: x_t | y is Gaussian with mean
// sqrt(abar_t) m_{0|y} and covariance abar_t Sigma_{0|y} + (1 - abar_t) I.
Eigen::VectorXd analytic_score_xt_given_y(const LinearGaussianWorld& w,
                                          const NoiseSchedule& s,
                                          const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& xt, int t);

// Closed-form E_{y|x0} ||x0 - A^T y||^2 = ||(I - A^T A) x0||^2
// + sigma_y^2 ||A||_F^2: the back-projection MSE at a fixed x0.
double backprojection_mse(const LinearGaussianWorld& w,
                          const Eigen::VectorXd& x0);

// Closed-form MSE of the convex combination w*A^T y + (1-w)*x_tilde_t:
// w^2 * backprojection_mse + (1-w)^2 * tilde_sigma2(t) * N.
double convex_estimate_mse(const LinearGaussianWorld& w, const NoiseSchedule& s,
                           const Eigen::VectorXd& x0, double weight, int t);

// Smallest tau such that backprojection_mse <= convex_estimate_mse for all
// t > tau. Empty when the inequality still fails at t = T. Since
// tilde_sigma2 is strictly increasing in t, the threshold is found by
// binary search.
std::optional<int> find_activation_tau(const LinearGaussianWorld& w,
                                       const NoiseSchedule& s,
                                       const Eigen::VectorXd& x0,
                                       double weight);

// E[x^T B x] for x ~ N(0, diag(sigma^2)): sum_i sigma_i^2 B_ii.
double trace_quadratic(const Eigen::VectorXd& sigma, const Eigen::MatrixXd& B);

// JSON round trip; doubles are serialized so the decimal form parses back
// bit-exactly.
std::string world_to_json(const LinearGaussianWorld& w);
LinearGaussianWorld world_from_json(const std::string& text);

}  // namespace dpir
