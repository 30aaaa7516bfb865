#pragma once

#include <span>

#include <Eigen/Core>

namespace dpir {

struct MetricReport {
  double mse = 0.0;
  double psnr_db = 0.0;  // +inf sentinel when mse == 0
  long n_samples = 0;
};

// Mean squared difference and PSNR for unit-peak signals by default.
MetricReport evaluate(const Eigen::VectorXd& reference,
                      const Eigen::VectorXd& estimate, double peak = 1.0);

// Pools reports by averaging MSE (weighted by n_samples) and recomputing
// PSNR at the given peak.
MetricReport average(std::span<const MetricReport> reports, double peak = 1.0);

}  // namespace dpir
