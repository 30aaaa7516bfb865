#include "dpir/schedule.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dpir/io.hpp"

namespace dpir {

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end,
                                    VarianceParam vp) {
  if (T < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_end < 1.0))
    throw std::invalid_argument("NoiseSchedule: betas must lie in (0, 1)");
  if (beta_start > beta_end)
    throw std::invalid_argument("NoiseSchedule: beta_start > beta_end");

  std::vector<double> betas(static_cast<std::size_t>(T) + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    betas[t] = (T == 1) ? beta_start
                        : beta_start + (static_cast<double>(t - 1) / (T - 1)) *
                                           (beta_end - beta_start);
  }
  return NoiseSchedule(std::move(betas), vp);
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas,
                                        VarianceParam vp) {
  if (betas.empty())
    throw std::invalid_argument("NoiseSchedule: empty beta sequence");
  for (double b : betas) {
    if (!(b > 0.0 && b <= 1.0))
      throw std::invalid_argument("NoiseSchedule: betas must lie in (0, 1]");
  }
  std::vector<double> padded(betas.size() + 1, 0.0);
  std::copy(betas.begin(), betas.end(), padded.begin() + 1);
  return NoiseSchedule(std::move(padded), vp);
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, VarianceParam vp)
    : T_(static_cast<int>(betas.size()) - 1), vp_(vp), betas_(std::move(betas)) {
  log_alphas_.assign(betas_.size(), 0.0);
  log_alpha_bar_.assign(betas_.size(), 0.0);
  alpha_bar_.assign(betas_.size(), 1.0);
  for (int t = 1; t <= T_; ++t) {
    log_alphas_[t] = std::log1p(-betas_[t]);  // -inf when beta_t == 1
    log_alpha_bar_[t] = log_alpha_bar_[t - 1] + log_alphas_[t];
    // The cached value is the direct running product (one rounding per
    // step); the log-space prefix sums above serve the partial products
    // of the merged kernels, where naive accumulation could underflow.
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - betas_[t]);
  }
}

void NoiseSchedule::check_t(int t, int lo) const {
  if (t < lo || t > T_)
    throw std::out_of_range("NoiseSchedule: t = " + std::to_string(t) +
                            " outside " + std::to_string(lo) + ".." +
                            std::to_string(T_));
}

double NoiseSchedule::beta(int t) const {
  check_t(t, 1);
  return betas_[t];
}

double NoiseSchedule::alpha(int t) const {
  check_t(t, 1);
  return 1.0 - betas_[t];
}

double NoiseSchedule::log_alpha(int t) const {
  check_t(t, 1);
  return log_alphas_[t];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_t(t, 0);
  return alpha_bar_[t];
}

double NoiseSchedule::log_alpha_bar(int t) const {
  check_t(t, 0);
  return log_alpha_bar_[t];
}

double NoiseSchedule::tilde_sigma2(int t) const {
  check_t(t, 1);
  return (1.0 - alpha_bar_[t]) / alpha_bar_[t];
}

double NoiseSchedule::tilde_sigma(int t) const {
  return std::sqrt(tilde_sigma2(t));
}

double NoiseSchedule::reverse_sigma2(int t) const {
  check_t(t, 1);
  if (vp_ == VarianceParam::Beta) return betas_[t];
  return (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]) * betas_[t];
}

void NoiseSchedule::write_csv(std::ostream& os) const {
  os << "t,beta,alpha,alpha_bar,tilde_sigma,reverse_sigma2\n";
  for (int t = 1; t <= T_; ++t) {
    os << t << ',' << format_double(betas_[t]) << ','
       << format_double(1.0 - betas_[t]) << ',' << format_double(alpha_bar_[t])
       << ',' << format_double(tilde_sigma(t)) << ','
       << format_double(reverse_sigma2(t)) << '\n';
  }
}

}  // namespace dpir
