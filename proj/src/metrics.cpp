#include "dpir/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpir {

namespace {

double psnr_from_mse(double mse, double peak) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace

MetricReport evaluate(const Eigen::VectorXd& reference,
                      const Eigen::VectorXd& estimate, double peak) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("evaluate: dimension mismatch");
  if (!(peak > 0.0)) throw std::invalid_argument("evaluate: peak must be > 0");
  MetricReport r;
  r.mse = (reference - estimate).squaredNorm() /
          static_cast<double>(reference.size());
  r.psnr_db = psnr_from_mse(r.mse, peak);
  r.n_samples = 1;
  return r;
}

MetricReport average(std::span<const MetricReport> reports, double peak) {
  MetricReport out;
  double mse_sum = 0.0;
  for (const auto& r : reports) {
    mse_sum += r.mse * static_cast<double>(r.n_samples);
    out.n_samples += r.n_samples;
  }
  if (out.n_samples == 0)
    throw std::invalid_argument("average: no samples");
  out.mse = mse_sum / static_cast<double>(out.n_samples);
  out.psnr_db = psnr_from_mse(out.mse, peak);
  return out;
}

}  // namespace dpir
