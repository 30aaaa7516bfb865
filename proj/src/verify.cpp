#include "dpir/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dpir/estimators.hpp"
#include "dpir/io.hpp"
#include "dpir/oracle.hpp"
#include "dpir/rng.hpp"
#include "dpir/sampler.hpp"

namespace dpir {

namespace {

double rel_err(double got, double want) {
  const double denom = std::max(std::abs(want), 1e-280);
  return std::abs(got - want) / denom;
}

CheckResult make_check(std::string name, double observed, double bound,
                       std::string detail = {}) {
  CheckResult c;
  c.name = std::move(name);
  c.observed = observed;
  c.bound = bound;
  c.pass = observed <= bound;
  c.detail = std::move(detail);
  return c;
}

// Streaming mean/variance accumulator (Welford).
struct RunningMoments {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return m2 / static_cast<double>(n - 1); }
  double stderr_of_mean() const {
    return std::sqrt(variance() / static_cast<double>(n));
  }
};

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.pass; });
}

double VerifyReport::max_observed() const {
  double m = 0.0;
  for (const auto& c : checks) m = std::max(m, c.observed);
  return m;
}

void print_report(std::ostream& os, const VerifyReport& report) {
  for (const auto& c : report.checks) {
    os << (c.pass ? "[PASS] " : "[FAIL] ") << report.suite << '.' << c.name
       << ": observed " << format_double(c.observed) << " (bound "
       << format_double(c.bound) << ')';
    if (!c.detail.empty()) os << "  " << c.detail;
    os << '\n';
  }
  os << (report.passed() ? "[PASS] " : "[FAIL] ") << report.suite
     << ": max observed " << format_double(report.max_observed()) << '\n';
}

MergedTransitionCoeffs compose_reverse_steps(const NoiseSchedule& s, int t,
                                             int k) {
  // One-step coefficients straight from the schedule quantities.
  const auto c0 = [&s](int j) {
    return std::sqrt(s.alpha_bar(j - 1)) * s.beta(j) / (1.0 - s.alpha_bar(j));
  };
  const auto c1 = [&s](int j) {
    return std::sqrt(s.alpha(j)) * (1.0 - s.alpha_bar(j - 1)) /
           (1.0 - s.alpha_bar(j));
  };
  MergedTransitionCoeffs acc;
  acc.t = t;
  acc.k = k;
  acc.c_x0 = c0(t);
  acc.c_xt = c1(t);
  acc.var = s.reverse_sigma2(t);
  // Chain x_{j-1} = c0(j) x0 + c1(j) x_j + N(0, sigma_j^2) into the
  // accumulated affine map of (x0, x_t).
  for (int j = t - 1; j > t - k; --j) {
    acc.c_x0 = c0(j) + c1(j) * acc.c_x0;
    acc.c_xt = c1(j) * acc.c_xt;
    acc.var = c1(j) * c1(j) * acc.var + s.reverse_sigma2(j);
  }
  return acc;
}

VerifyReport verify_merged_kernel(int T, std::uint64_t seed, int num_pairs,
                                  double tol) {
  VerifyReport report;
  report.suite = "merged_kernel";

  std::vector<std::pair<int, int>> pairs = {{T, std::max(1, T - 5)},
                                            {T, std::max(1, 3 * T / 4)}};
  NormalStream rng(seed, 0);
  while (static_cast<int>(pairs.size()) < num_pairs) {
    const int t = 1 + static_cast<int>(rng.uniform() * T);
    const int k = 1 + static_cast<int>(rng.uniform() * t);
    pairs.emplace_back(std::min(t, T), std::min(k, t));
  }

  for (VarianceParam vp : {VarianceParam::Beta, VarianceParam::TildeBeta}) {
    const auto s = NoiseSchedule::linear(T, 1e-4, 2e-2, vp);
    double worst_mean = 0.0, worst_var = 0.0;
    for (auto [t, k] : pairs) {
      const auto merged = merged_transition(s, t, k);
      const auto composed = compose_reverse_steps(s, t, k);
      worst_mean = std::max({worst_mean, rel_err(merged.c_x0, composed.c_x0),
                             rel_err(merged.c_xt, composed.c_xt)});
      worst_var = std::max(worst_var, rel_err(merged.var, composed.var));
    }
    const char* tag = vp == VarianceParam::Beta ? "beta" : "tilde_beta";
    report.checks.push_back(make_check(std::string("mean_coeffs_") + tag,
                                       worst_mean, tol));
    report.checks.push_back(
        make_check(std::string("variance_") + tag, worst_var, tol));
  }

  // A noiseless forward point must map onto the noiseless forward point
  // k steps earlier: c_x0 + c_xt sqrt(abar_t) = sqrt(abar_{t-k}).
  const auto s = NoiseSchedule::linear(T, 1e-4, 2e-2);
  double worst_consistency = 0.0;
  for (auto [t, k] : pairs) {
    const auto merged = merged_transition(s, t, k);
    const double got = merged.c_x0 + merged.c_xt * std::sqrt(s.alpha_bar(t));
    worst_consistency =
        std::max(worst_consistency, rel_err(got, std::sqrt(s.alpha_bar(t - k))));
  }
  report.checks.push_back(
      make_check("noiseless_consistency", worst_consistency, tol));
  return report;
}

VerifyReport verify_score_identity(int num_worlds, std::uint64_t seed,
                                   double tol) {
  VerifyReport report;
  report.suite = "score_identity";
  const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2);

  double worst = 0.0;
  NormalStream rng(seed, 1);
  for (int i = 0; i < num_worlds; ++i) {
    const int N = 1 + static_cast<int>(rng.uniform() * 16.0);
    const int M = 1 + static_cast<int>(rng.uniform() * 24.0);
    const auto world =
        make_world(N, M, seed + 17 * i + 1, 0.5 + 0.5 * rng.uniform());
    const auto data = draw_dataset(world, 1, seed + 1000 + i);
    const int t = 1 + static_cast<int>(rng.uniform() * s.steps());

    // x_t drawn from the forward marginal of the true x0.
    NormalStream noise(seed, 2000 + static_cast<std::uint64_t>(i));
    const auto fm = forward_marginal(s, data[0].x0, t);
    const Eigen::VectorXd xt =
        fm.mean + fm.stddev * noise.vector(world.signal_dim());

    const auto joint = cond_x0_given_y_xt(world, s, data[0].y, xt, t);
    const Eigen::VectorXd via_expectation = score_from_x0(s, joint.mean, xt, t);
    const Eigen::VectorXd direct =
        analytic_score_xt_given_y(world, s, data[0].y, xt, t);
    worst = std::max(worst, (via_expectation - direct).cwiseAbs().maxCoeff());
  }
  report.checks.push_back(make_check("max_abs_score_error", worst, tol));
  return report;
}

VerifyReport verify_restorer_dominance(int num_worlds, std::uint64_t seed,
                                       long mc_draws) {
  VerifyReport report;
  report.suite = "restorer_dominance";
  const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2);

  bool all_finite = true;
  bool sign_pattern_ok = true;
  bool monotone_ok = true;
  double worst_lhs_z = 0.0, worst_rhs_z = 0.0;

  NormalStream rng(seed, 3);
  for (int i = 0; i < num_worlds; ++i) {
    const int N = 2 + static_cast<int>(rng.uniform() * 15.0);
    const int M = 2 + static_cast<int>(rng.uniform() * 23.0);
    const auto world =
        make_world(N, M, seed + 31 * i + 7, 0.4 + 0.6 * rng.uniform());
    const Eigen::VectorXd x0 = draw_dataset(world, 1, seed + 5000 + i)[0].x0;
    const double lhs = backprojection_mse(world, x0);

    int prev_tau = -1;
    for (int wi = 1; wi <= 9; ++wi) {
      const double w = 0.1 * wi;
      const auto tau = find_activation_tau(world, s, x0, w);
      if (!tau) {
        all_finite = false;
        continue;
      }
      // Exhaustive scan: holds for every t above tau, fails at tau itself.
      for (int t = *tau + 1; t <= s.steps(); ++t)
        if (lhs > convex_estimate_mse(world, s, x0, w, t)) sign_pattern_ok = false;
      if (*tau > 0 && lhs <= convex_estimate_mse(world, s, x0, w, *tau))
        sign_pattern_ok = false;
      // Larger restorer weight postpones the crossover.
      if (*tau < prev_tau) monotone_ok = false;
      prev_tau = *tau;
    }

    // Monte Carlo for both closed forms, at w = 0.5 and a t bracketing tau.
    const double w = 0.5;
    const int t_probe =
        std::min(s.steps(), std::max(1, find_activation_tau(world, s, x0, w)
                                            .value_or(s.steps() / 2)) +
                                1);
    NormalStream mc(seed, 7000 + static_cast<std::uint64_t>(i));
    RunningMoments lhs_mc, rhs_mc;
    const double st = s.tilde_sigma(t_probe);
    for (long d = 0; d < mc_draws; ++d) {
      const Eigen::VectorXd n = mc.vector(world.obs_dim());
      const Eigen::VectorXd y = world.A * x0 + world.sigma_y * n;
      const Eigen::VectorXd back = world.A.transpose() * y;
      lhs_mc.add((x0 - back).squaredNorm());
      const Eigen::VectorXd eps = mc.vector(world.signal_dim());
      const Eigen::VectorXd x_tilde = x0 + st * eps;
      rhs_mc.add((x0 - (w * back + (1.0 - w) * x_tilde)).squaredNorm());
    }
    worst_lhs_z = std::max(
        worst_lhs_z, std::abs(lhs_mc.mean - lhs) / lhs_mc.stderr_of_mean());
    const double rhs = convex_estimate_mse(world, s, x0, w, t_probe);
    worst_rhs_z = std::max(
        worst_rhs_z, std::abs(rhs_mc.mean - rhs) / rhs_mc.stderr_of_mean());
  }

  report.checks.push_back(
      make_check("tau_finite", all_finite ? 0.0 : 1.0, 0.0));
  report.checks.push_back(
      make_check("inequality_sign_pattern", sign_pattern_ok ? 0.0 : 1.0, 0.0));
  report.checks.push_back(
      make_check("tau_monotone_in_weight", monotone_ok ? 0.0 : 1.0, 0.0));
  report.checks.push_back(
      make_check("lhs_monte_carlo_z", worst_lhs_z, 3.0, "standard errors"));
  report.checks.push_back(
      make_check("rhs_monte_carlo_z", worst_rhs_z, 3.0, "standard errors"));
  return report;
}

VerifyReport verify_trace_identity(int dim, int num_pairs, long mc_draws,
                                   std::uint64_t seed) {
  VerifyReport report;
  report.suite = "trace_identity";
  double worst_z = 0.0;
  NormalStream rng(seed, 11);
  for (int p = 0; p < num_pairs; ++p) {
    Eigen::VectorXd sigma(dim);
    for (int i = 0; i < dim; ++i) sigma[i] = rng.uniform(0.2, 2.0);
    Eigen::MatrixXd B(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) B(i, j) = rng.next();

    const double closed = trace_quadratic(sigma, B);
    NormalStream mc(seed, 9000 + static_cast<std::uint64_t>(p));
    RunningMoments q;
    Eigen::VectorXd x(dim);
    for (long d = 0; d < mc_draws; ++d) {
      for (int i = 0; i < dim; ++i) x[i] = sigma[i] * mc.next();
      q.add(x.dot(B * x));
    }
    worst_z = std::max(worst_z, std::abs(q.mean - closed) / q.stderr_of_mean());
  }
  report.checks.push_back(
      make_check("monte_carlo_z", worst_z, 3.0, "standard errors"));
  return report;
}

VerifyReport verify_ddim_equivalence(std::uint64_t seed, long num_runs,
                                     int tau) {
  VerifyReport report;
  report.suite = "ddim_equivalence";
  const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2, VarianceParam::TildeBeta);
  const auto world = make_world(1, 1, seed + 1);
  const auto data = draw_dataset(world, 1, seed + 2);
  const auto stack = make_stack("gaussian", "mmse", "convex:logistic", world, s, tau);

  SamplerConfig ancestral;
  ancestral.mode = SamplerMode::Accelerated;
  ancestral.tau = tau;
  ancestral.seed = seed;
  ancestral.record_states = false;

  SamplerConfig ddim = ancestral;
  ddim.mode = SamplerMode::AcceleratedDdim;
  ddim.stride = 1;
  ddim.eta = 1.0;

  RunningMoments anc, ddm;
  for (long r = 0; r < num_runs; ++r) {
    const auto a = sample_accelerated(stack, world, data[0].y, ancestral, s,
                                      static_cast<std::uint64_t>(r));
    const auto d = sample_accelerated_ddim(stack, world, data[0].y, ddim, s,
                                           static_cast<std::uint64_t>(r));
    anc.add(a.x0_final[0]);
    ddm.add(d.x0_final[0]);
  }
  const double mean_z =
      std::abs(anc.mean - ddm.mean) /
      std::sqrt(anc.variance() / static_cast<double>(anc.n) +
                ddm.variance() / static_cast<double>(ddm.n));
  const double var_ratio_dev = std::abs(anc.variance() / ddm.variance() - 1.0);
  report.checks.push_back(
      make_check("two_sample_mean_z", mean_z, 4.0, "standard errors"));
  report.checks.push_back(
      make_check("variance_ratio_deviation", var_ratio_dev, 0.03));
  return report;
}

}  // namespace dpir
