#include "dpir/kernels.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "dpir/io.hpp"

namespace dpir {

namespace {

void check_dims(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
}

}  // namespace

double posterior_coef_x0(const NoiseSchedule& s, int t) {
  return std::sqrt(s.alpha_bar(t - 1)) * s.beta(t) / (1.0 - s.alpha_bar(t));
}

double posterior_coef_xt(const NoiseSchedule& s, int t) {
  return std::sqrt(s.alpha(t)) * (1.0 - s.alpha_bar(t - 1)) /
         (1.0 - s.alpha_bar(t));
}

double merged_coef_xt(const NoiseSchedule& s, int i, int j) {
  if (j < 1)
    throw std::out_of_range("merged_coef_xt: j must be >= 1");
  if (i > s.steps())
    throw std::out_of_range("merged_coef_xt: i exceeds schedule length");
  if (i < j) return 1.0;
  // prod_{n=j..i} alpha_n = abar_i / abar_{j-1}, formed in log space.
  const double log_prod = s.log_alpha_bar(i) - s.log_alpha_bar(j - 1);
  return std::exp(0.5 * log_prod) * (1.0 - s.alpha_bar(j - 1)) /
         (1.0 - s.alpha_bar(i));
}

MergedTransitionCoeffs merged_transition(const NoiseSchedule& s, int t,
                                         int k) {
  if (t < 1 || t > s.steps())
    throw std::out_of_range("merged_transition: t out of range");
  if (k < 1 || k > t)
    throw std::out_of_range("merged_transition: k must satisfy 1 <= k <= t");
  MergedTransitionCoeffs c;
  c.t = t;
  c.k = k;
  const int j = t - k + 1;
  c.c_xt = merged_coef_xt(s, t, j);
  for (int i = 0; i < k; ++i) {
    const double g = merged_coef_xt(s, t - i - 1, j);
    c.c_x0 += g * posterior_coef_x0(s, t - i);
    c.var += g * g * s.reverse_sigma2(t - i);
  }
  return c;
}

MergedJumpTable::MergedJumpTable(const NoiseSchedule& s, int target)
    : target_(target) {
  if (target < 0 || target >= s.steps())
    throw std::out_of_range("MergedJumpTable: target outside 0..T-1");
  const int j = target + 1;
  coeffs_.resize(s.steps() - target);
  double c_x0 = 0.0, var = 0.0;
  for (int t = target + 1; t <= s.steps(); ++t) {
    const double g = merged_coef_xt(s, t - 1, j);
    c_x0 += g * posterior_coef_x0(s, t);
    var += g * g * s.reverse_sigma2(t);
    auto& c = coeffs_[t - target - 1];
    c.t = t;
    c.k = t - target;
    c.c_x0 = c_x0;
    c.c_xt = merged_coef_xt(s, t, j);
    c.var = var;
  }
}

const MergedTransitionCoeffs& MergedJumpTable::from(int t) const {
  const int idx = t - target_ - 1;
  if (idx < 0 || idx >= static_cast<int>(coeffs_.size()))
    throw std::out_of_range("MergedJumpTable: t outside (target, T]");
  return coeffs_[idx];
}

GaussianStep forward_marginal(const NoiseSchedule& s,
                              const Eigen::VectorXd& x0, int t) {
  const double ab = s.alpha_bar(t);
  return {std::sqrt(ab) * x0, std::sqrt(1.0 - ab)};
}

Eigen::VectorXd posterior_step(const NoiseSchedule& s,
                               const Eigen::VectorXd& xt,
                               const Eigen::VectorXd& x0_hat, int t) {
  check_dims(xt, x0_hat, "posterior_step");
  return posterior_coef_x0(s, t) * x0_hat + posterior_coef_xt(s, t) * xt;
}

Eigen::VectorXd posterior_step(const NoiseSchedule& s,
                               const Eigen::VectorXd& xt,
                               const Eigen::VectorXd& x0_hat, int t,
                               const Eigen::VectorXd& noise) {
  check_dims(xt, noise, "posterior_step noise");
  return posterior_step(s, xt, x0_hat, t) +
         std::sqrt(s.reverse_sigma2(t)) * noise;
}

Eigen::VectorXd score_from_x0(const NoiseSchedule& s,
                              const Eigen::VectorXd& x0_hat,
                              const Eigen::VectorXd& xt, int t) {
  check_dims(x0_hat, xt, "score_from_x0");
  const double ab = s.alpha_bar(t);
  return (std::sqrt(ab) * x0_hat - xt) / (1.0 - ab);
}

Eigen::VectorXd mean_from_score(const NoiseSchedule& s,
                                const Eigen::VectorXd& xt,
                                const Eigen::VectorXd& score, int t) {
  check_dims(xt, score, "mean_from_score");
  const double a = s.alpha(t);
  return (xt + (1.0 - a) * score) / std::sqrt(a);
}

double ddim_sigma(const NoiseSchedule& s, int t, int t_next, double eta) {
  const double ab_t = s.alpha_bar(t);
  const double ab_n = s.alpha_bar(t_next);
  return eta * std::sqrt((1.0 - ab_n) / (1.0 - ab_t)) *
         std::sqrt(1.0 - ab_t / ab_n);
}

namespace {

Eigen::VectorXd ddim_step_impl(const NoiseSchedule& s,
                               const Eigen::VectorXd& xt,
                               const Eigen::VectorXd& x0_hat, int t,
                               int t_next, double eta,
                               const Eigen::VectorXd* noise) {
  check_dims(xt, x0_hat, "ddim_step");
  if (t_next >= t)
    throw std::invalid_argument("ddim_step: t_next must be < t");
  if (t_next < 0) throw std::out_of_range("ddim_step: t_next must be >= 0");
  if (eta < 0.0 || eta > 1.0)
    throw std::invalid_argument("ddim_step: eta must lie in [0, 1]");

  const double ab_t = s.alpha_bar(t);
  const double ab_n = s.alpha_bar(t_next);
  const double sd = ddim_sigma(s, t, t_next, eta);
  double resid2 = 1.0 - ab_n - sd * sd;
  if (resid2 < -1e-12)
    throw std::invalid_argument(
        "ddim_step: residual variance negative; eta parametrization invalid "
        "for this (t, t_next)");
  if (resid2 < 0.0) resid2 = 0.0;

  Eigen::VectorXd x = std::sqrt(ab_n) * x0_hat +
                      std::sqrt(resid2) * (xt - std::sqrt(ab_t) * x0_hat) /
                          std::sqrt(1.0 - ab_t);
  if (noise != nullptr && eta > 0.0) {
    check_dims(xt, *noise, "ddim_step noise");
    x += sd * (*noise);
  }
  return x;
}

}  // namespace

Eigen::VectorXd ddim_step(const NoiseSchedule& s, const Eigen::VectorXd& xt,
                          const Eigen::VectorXd& x0_hat, int t, int t_next,
                          double eta) {
  return ddim_step_impl(s, xt, x0_hat, t, t_next, eta, nullptr);
}

Eigen::VectorXd ddim_step(const NoiseSchedule& s, const Eigen::VectorXd& xt,
                          const Eigen::VectorXd& x0_hat, int t, int t_next,
                          double eta, const Eigen::VectorXd& noise) {
  return ddim_step_impl(s, xt, x0_hat, t, t_next, eta, &noise);
}

void write_merged_coeffs_csv(std::ostream& os, const NoiseSchedule& s,
                             const std::vector<std::pair<int, int>>& tk_pairs) {
  os << "t,k,c_x0,c_xt,var\n";
  for (auto [t, k] : tk_pairs) {
    const auto c = merged_transition(s, t, k);
    os << t << ',' << k << ',' << format_double(c.c_x0) << ','
       << format_double(c.c_xt) << ',' << format_double(c.var) << '\n';
  }
}

}  // namespace dpir
