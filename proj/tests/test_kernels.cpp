#include <cmath>
#include <sstream>
#include <stdexcept>

#include <doctest.h>

#include "dpir/kernels.hpp"
#include "dpir/rng.hpp"
#include "dpir/schedule.hpp"
#include "dpir/verify.hpp"

using namespace dpir;

namespace {

const NoiseSchedule& long_schedule() {
  static const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2);
  return s;
}

NoiseSchedule two_step() { return NoiseSchedule::from_betas({0.1, 0.2}); }

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("posterior x0 coefficient at t = 1 is one") {
  // abar_0 = 1 and 1 - abar_1 = beta_1, so the ratio collapses. The
  // complement 1 - abar_1 reconstructs beta_1 only to about half an ulp
  // of 1, hence the 1e-12 band.
  CHECK(posterior_coef_x0(long_schedule(), 1) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior x0 coefficient on the two-step synthetic schedule") {
  const auto s = two_step();
  // Hand arithmetic: sqrt(0.9) * 0.2 / (1 - 0.72).
  CHECK(posterior_coef_x0(s, 2) ==
        doctest::Approx(0.67763092717893843).epsilon(1e-14));
}

TEST_CASE("posterior coefficients stay positive") {
  NormalStream rng(41);
  for (int i = 0; i < 50; ++i) {
    const int t = 1 + static_cast<int>(rng.uniform() * 1000);
    CHECK(posterior_coef_x0(long_schedule(), t) > 0.0);
    CHECK(posterior_coef_xt(long_schedule(), t) > 0.0);
  }
}

TEST_CASE("merged x coefficient base cases") {
  const auto& s = long_schedule();
  CHECK(merged_coef_xt(s, 5, 9) == 1.0);
  for (int t : {1, 17, 500, 1000})
    CHECK(merged_coef_xt(s, t, t) ==
          doctest::Approx(posterior_coef_xt(s, t)).epsilon(1e-14));
  CHECK_THROWS_AS(merged_coef_xt(s, 10, 0), std::out_of_range);
  CHECK_THROWS_AS(merged_coef_xt(s, 1001, 5), std::out_of_range);
}

TEST_CASE("merged x coefficient splits multiplicatively") {
  const auto& s = long_schedule();
  CHECK(merged_coef_xt(s, 10, 4) ==
        doctest::Approx(merged_coef_xt(s, 4, 4) * merged_coef_xt(s, 10, 5))
            .epsilon(1e-12));
  NormalStream rng(42);
  for (int i = 0; i < 200; ++i) {
    const int j = 1 + static_cast<int>(rng.uniform() * 999);
    const int ii = j + static_cast<int>(rng.uniform() * (1000 - j));
    CHECK(merged_coef_xt(s, ii, j) ==
          doctest::Approx(merged_coef_xt(s, j, j) * merged_coef_xt(s, ii, j + 1))
              .epsilon(1e-12));
  }
}

TEST_CASE("merged transition at k = 1 reduces to the one-step kernel") {
  for (VarianceParam vp : {VarianceParam::Beta, VarianceParam::TildeBeta}) {
    const auto s = NoiseSchedule::linear(100, 1e-3, 5e-2, vp);
    for (int t : {1, 2, 50, 100}) {
      const auto c = merged_transition(s, t, 1);
      CHECK(c.c_x0 == doctest::Approx(posterior_coef_x0(s, t)).epsilon(1e-14));
      CHECK(c.c_xt == doctest::Approx(posterior_coef_xt(s, t)).epsilon(1e-14));
      CHECK(c.var == doctest::Approx(s.reverse_sigma2(t)).epsilon(1e-14));
    }
  }
}

TEST_CASE("merged transition rejects bad step counts") {
  const auto& s = long_schedule();
  CHECK_THROWS_AS(merged_transition(s, 10, 0), std::out_of_range);
  CHECK_THROWS_AS(merged_transition(s, 10, 11), std::out_of_range);
  CHECK_THROWS_AS(merged_transition(s, 1001, 1), std::out_of_range);
}

TEST_CASE("merged transition equals step-by-step composition") {
  // Small synthetic case checked explicitly...
  const auto s5 = NoiseSchedule::from_betas({0.05, 0.1, 0.15, 0.2, 0.25});
  const auto merged = merged_transition(s5, 5, 3);
  const auto composed = compose_reverse_steps(s5, 5, 3);
  CHECK(merged.c_x0 == doctest::Approx(composed.c_x0).epsilon(1e-13));
  CHECK(merged.c_xt == doctest::Approx(composed.c_xt).epsilon(1e-13));
  CHECK(merged.var == doctest::Approx(composed.var).epsilon(1e-13));

  // ...and the randomized property on the long schedule, both variances.
  for (VarianceParam vp : {VarianceParam::Beta, VarianceParam::TildeBeta}) {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2, vp);
    NormalStream rng(43);
    for (int i = 0; i < 60; ++i) {
      const int t = 1 + static_cast<int>(rng.uniform() * 1000);
      const int k = 1 + static_cast<int>(rng.uniform() * t);
      const auto m = merged_transition(s, t, k);
      const auto c = compose_reverse_steps(s, t, k);
      CHECK(m.c_x0 == doctest::Approx(c.c_x0).epsilon(1e-10));
      CHECK(m.c_xt == doctest::Approx(c.c_xt).epsilon(1e-10));
      CHECK(m.var == doctest::Approx(c.var).epsilon(1e-10));
    }
  }
}

TEST_CASE("noiseless forward points map onto earlier forward points") {
  const auto& s = long_schedule();
  NormalStream rng(44);
  for (int i = 0; i < 100; ++i) {
    const int t = 1 + static_cast<int>(rng.uniform() * 1000);
    const int k = 1 + static_cast<int>(rng.uniform() * t);
    const auto c = merged_transition(s, t, k);
    CHECK(c.c_x0 + c.c_xt * std::sqrt(s.alpha_bar(t)) ==
          doctest::Approx(std::sqrt(s.alpha_bar(t - k))).epsilon(1e-10));
    CHECK(c.var >= 0.0);
    CHECK(c.c_x0 >= 0.0);
    CHECK(c.c_xt >= 0.0);
  }
}

TEST_CASE("merged jump table matches per-call evaluation") {
  const auto& s = long_schedule();
  for (int target : {0, 250, 998}) {
    const MergedJumpTable table(s, target);
    for (int t = target + 1; t <= 1000; t += 7) {
      const auto a = table.from(t);
      const auto b = merged_transition(s, t, t - target);
      CHECK(a.c_x0 == doctest::Approx(b.c_x0).epsilon(1e-13));
      CHECK(a.c_xt == doctest::Approx(b.c_xt).epsilon(1e-13));
      CHECK(a.var == doctest::Approx(b.var).epsilon(1e-13));
    }
    CHECK_THROWS_AS(table.from(target), std::out_of_range);
  }
}

TEST_CASE("forward marginal") {
  const auto& s = long_schedule();
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);

  const auto one = forward_marginal(s, x0, 1);
  CHECK(one.stddev == doctest::Approx(1e-2).epsilon(1e-12));  // sqrt(beta_1)

  const auto zero = forward_marginal(s, Eigen::VectorXd::Zero(4), 500);
  CHECK(zero.mean.cwiseAbs().maxCoeff() == 0.0);

  // At t = T the marginal is standard normal to within 1e-4.
  const auto last = forward_marginal(s, x0, 1000);
  CHECK(std::abs(last.stddev - 1.0) < 1e-4);
}

TEST_CASE("posterior step fixed point and noise path") {
  const auto& s = long_schedule();
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(3, 0.5, 1.5);
  for (int t : {2, 100, 1000}) {
    const Eigen::VectorXd xt = std::sqrt(s.alpha_bar(t)) * x0;
    const Eigen::VectorXd next = posterior_step(s, xt, x0, t);
    const Eigen::VectorXd want = std::sqrt(s.alpha_bar(t - 1)) * x0;
    CHECK((next - want).cwiseAbs().maxCoeff() < 1e-10 * want.cwiseAbs().maxCoeff());
  }
  NormalStream rng(45);
  const Eigen::VectorXd xt = rng.vector(3);
  const Eigen::VectorXd z = rng.vector(3);
  const Eigen::VectorXd with_noise = posterior_step(s, xt, x0, 10, z);
  const Eigen::VectorXd mean_only = posterior_step(s, xt, x0, 10);
  CHECK((with_noise - mean_only - std::sqrt(s.reverse_sigma2(10)) * z)
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  CHECK_THROWS_AS(posterior_step(s, xt, Eigen::VectorXd::Zero(2), 10),
                  std::invalid_argument);
}

TEST_CASE("two chained posterior steps match the merged two-step kernel") {
  const auto s = NoiseSchedule::from_betas({0.05, 0.1, 0.15, 0.2});
  const auto c = merged_transition(s, 4, 2);
  Eigen::VectorXd x0(1), xt(1);
  x0 << 0.7;
  xt << -0.3;
  // Means compose deterministically.
  const Eigen::VectorXd mid = posterior_step(s, xt, x0, 4);
  const Eigen::VectorXd end = posterior_step(s, mid, x0, 3);
  CHECK(end[0] == doctest::Approx(c.c_x0 * x0[0] + c.c_xt * xt[0]).epsilon(1e-13));
  // Variances compose through the affine map.
  const double var = posterior_coef_xt(s, 3) * posterior_coef_xt(s, 3) *
                         s.reverse_sigma2(4) +
                     s.reverse_sigma2(3);
  CHECK(c.var == doctest::Approx(var).epsilon(1e-13));
}

TEST_CASE("score vanishes at the rescaled mean and matches 1-D arithmetic") {
  const auto& s = long_schedule();
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(3, 0.8);
  const Eigen::VectorXd xt = std::sqrt(s.alpha_bar(40)) * x0;
  CHECK(score_from_x0(s, x0, xt, 40).cwiseAbs().maxCoeff() < 1e-14);

  // abar = 0.25 via a single step with beta = 0.75:
  // (sqrt(0.25) * 2 - 3) / 0.75 = -8/3.
  const auto one = NoiseSchedule::from_betas({0.75});
  Eigen::VectorXd xh(1), xv(1);
  xh << 2.0;
  xv << 3.0;
  CHECK(score_from_x0(one, xh, xv, 1)[0] ==
        doctest::Approx(-8.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("mean recovered from the score reproduces the posterior mean") {
  const auto& s = long_schedule();
  NormalStream rng(46);
  const Eigen::VectorXd x0 = rng.vector(4);
  for (int t = 1; t <= 1000; t += 13) {
    const Eigen::VectorXd xt = rng.vector(4);
    const Eigen::VectorXd score = score_from_x0(s, x0, xt, t);
    const Eigen::VectorXd via_score = mean_from_score(s, xt, score, t);
    const Eigen::VectorXd direct = posterior_step(s, xt, x0, t);
    CHECK((via_score - direct).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + direct.cwiseAbs().maxCoeff()));
  }

  const Eigen::VectorXd xt = rng.vector(4);
  CHECK((mean_from_score(s, xt, Eigen::VectorXd::Zero(4), 9) -
         xt / std::sqrt(s.alpha(9)))
            .cwiseAbs()
            .maxCoeff() < 1e-15);

  // Continuity as beta -> 0: the step barely moves the state.
  const auto tiny = NoiseSchedule::from_betas({1e-12});
  CHECK((mean_from_score(tiny, xt, Eigen::VectorXd::Zero(4), 1) - xt)
            .cwiseAbs()
            .maxCoeff() < 1e-11);
}

TEST_CASE("ddim deterministic fixed point") {
  const auto& s = long_schedule();
  const Eigen::VectorXd x0 = Eigen::VectorXd::LinSpaced(3, -0.2, 0.9);
  const Eigen::VectorXd xt = std::sqrt(s.alpha_bar(300)) * x0;
  const Eigen::VectorXd out = ddim_step(s, xt, x0, 300, 120, 0.0);
  const Eigen::VectorXd want = std::sqrt(s.alpha_bar(120)) * x0;
  CHECK((out - want).cwiseAbs().maxCoeff() < 1e-12);
  // Jump to zero returns the estimate itself.
  const Eigen::VectorXd to_zero = ddim_step(s, xt, x0, 300, 0, 0.0);
  CHECK((to_zero - x0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ddim at eta = 1 recovers the posterior variance") {
  const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2, VarianceParam::TildeBeta);
  for (int t : {2, 50, 400, 1000}) {
    const double sd = ddim_sigma(s, t, t - 1, 1.0);
    CHECK(sd * sd == doctest::Approx(s.reverse_sigma2(t)).epsilon(1e-10));
  }
}

TEST_CASE("ddim argument validation") {
  const auto& s = long_schedule();
  const Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(ddim_step(s, v, v, 10, 10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ddim_step(s, v, v, 10, 12, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ddim_step(s, v, v, 10, 5, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(ddim_step(s, v, v, 10, -1, 0.0), std::out_of_range);
}

TEST_CASE("ddim stride-5 grid from 250 reaches zero in 50 updates") {
  const auto& s = long_schedule();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.4);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(2, 0.1);
  int t = 250, updates = 0;
  while (t > 0) {
    const int t_next = std::max(t - 5, 0);
    x = ddim_step(s, x, x0, t, t_next, 0.0);
    t = t_next;
    ++updates;
  }
  CHECK(updates == 50);
}

TEST_CASE("merged step and iterated chain agree in distribution") {
  // 3-dimensional state, 1e5 samples each way, fixed x0 estimate.
  const auto s = NoiseSchedule::from_betas(
      {0.05, 0.08, 0.11, 0.14, 0.17, 0.2, 0.23, 0.26, 0.29, 0.32, 0.35, 0.38});
  const int t = 12, k = 7;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(3, 0.6);
  const Eigen::VectorXd xt = Eigen::VectorXd::Constant(3, -0.9);
  const auto c = merged_transition(s, t, k);

  const long n = 100000;
  Eigen::VectorXd sum_m = Eigen::VectorXd::Zero(3), sum_i = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd sq_m = Eigen::VectorXd::Zero(3), sq_i = Eigen::VectorXd::Zero(3);
  NormalStream merged_rng(47, 0), iter_rng(47, 1);
  for (long r = 0; r < n; ++r) {
    const Eigen::VectorXd xm =
        c.c_x0 * x0 + c.c_xt * xt + std::sqrt(c.var) * merged_rng.vector(3);
    sum_m += xm;
    sq_m += xm.cwiseAbs2();
    Eigen::VectorXd xi = xt;
    for (int j = t; j > t - k; --j)
      xi = posterior_step(s, xi, x0, j, iter_rng.vector(3));
    sum_i += xi;
    sq_i += xi.cwiseAbs2();
  }
  const Eigen::VectorXd mean_m = sum_m / n, mean_i = sum_i / n;
  const Eigen::VectorXd var_m = sq_m / n - mean_m.cwiseAbs2();
  const Eigen::VectorXd var_i = sq_i / n - mean_i.cwiseAbs2();
  for (int d = 0; d < 3; ++d) {
    const double se =
        std::sqrt(var_m[d] / static_cast<double>(n) + var_i[d] / static_cast<double>(n));
    CHECK(std::abs(mean_m[d] - mean_i[d]) < 4.0 * se);
    CHECK(std::abs(var_m[d] / var_i[d] - 1.0) < 0.03);
  }
}

TEST_CASE("merged coefficient csv dump") {
  std::ostringstream os;
  write_merged_coeffs_csv(os, long_schedule(), {{10, 3}, {1000, 995}});
  const std::string text = os.str();
  CHECK(text.rfind("t,k,c_x0,c_xt,var\n", 0) == 0);
  CHECK(text.find("1000,995,") != std::string::npos);
}

TEST_SUITE_END();
