#pragma once

// Test-only oracles, deliberately independent of the library's computation
// paths: joint-covariance Schur conditioning and a power-iteration spectral
// norm. Used to cross-check the closed-form conditioning code.

#include <cmath>

#include <Eigen/Dense>

#include "dpir/oracle.hpp"

namespace dpir::testing {

// Conditions x0 on z = C x0 + noise (noise cov R) by building the joint
// (N + m) covariance and applying the Schur complement through an explicit
// inverse. Slow and simple on purpose.
inline GaussianDist schur_condition(const LinearGaussianWorld& w,
                                    const Eigen::MatrixXd& C,
                                    const Eigen::MatrixXd& R,
                                    const Eigen::VectorXd& z) {
  const Eigen::Index n = w.signal_dim();
  const Eigen::Index m = C.rows();
  Eigen::MatrixXd joint(n + m, n + m);
  joint.topLeftCorner(n, n) = w.Sigma0;
  joint.topRightCorner(n, m) = w.Sigma0 * C.transpose();
  joint.bottomLeftCorner(m, n) = C * w.Sigma0;
  joint.bottomRightCorner(m, m) = C * w.Sigma0 * C.transpose() + R;

  const Eigen::MatrixXd Szz_inv = joint.bottomRightCorner(m, m).inverse();
  GaussianDist d;
  d.mean = w.mu0 + joint.topRightCorner(n, m) * Szz_inv * (z - C * w.mu0);
  d.cov = joint.topLeftCorner(n, n) -
          joint.topRightCorner(n, m) * Szz_inv * joint.bottomLeftCorner(m, n);
  return d;
}

inline double power_iteration_norm(const Eigen::MatrixXd& A, int iters = 500) {
  Eigen::MatrixXd G = A.transpose() * A;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(G.rows()).normalized();
  for (int i = 0; i < iters; ++i) v = (G * v).normalized();
  return std::sqrt(v.dot(G * v));
}

}  // namespace dpir::testing
