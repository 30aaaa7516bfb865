#include "dpir/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

namespace dpir {

Eigen::VectorXd IdentityDenoiser::denoise(const Eigen::VectorXd& x_tilde,
                                          double sigma_tilde) const {
  if (sigma_tilde < 0.0)
    throw std::invalid_argument("denoise: negative sigma_tilde");
  return x_tilde;
}

Eigen::VectorXd GaussianDenoiser::denoise(const Eigen::VectorXd& x_tilde,
                                          double sigma_tilde) const {
  if (sigma_tilde < 0.0)
    throw std::invalid_argument("denoise: negative sigma_tilde");
  return cond_x0_given_xtilde(world_, x_tilde, sigma_tilde).mean;
}

Eigen::VectorXd BackprojectionRestorer::restore(
    const Eigen::VectorXd& y) const {
  if (y.size() != At_.cols())
    throw std::invalid_argument("restore: observation dimension mismatch");
  return At_ * y;
}

Eigen::VectorXd MmseRestorer::restore(const Eigen::VectorXd& y) const {
  if (y.size() != world_.obs_dim())
    throw std::invalid_argument("restore: observation dimension mismatch");
  return cond_x0_given_y(world_, y).mean;
}

FusionWeightPolicy FusionWeightPolicy::constant(double w) {
  if (w < 0.0 || w > 1.0)
    throw std::invalid_argument("FusionWeightPolicy: constant weight outside [0,1]");
  return FusionWeightPolicy(Kind::Constant, [w](int) { return w; });
}

FusionWeightPolicy FusionWeightPolicy::logistic(double midpoint, double slope) {
  if (slope <= 0.0)
    throw std::invalid_argument("FusionWeightPolicy: slope must be positive");
  return FusionWeightPolicy(Kind::Logistic, [midpoint, slope](int t) {
    return 1.0 / (1.0 + std::exp(-(static_cast<double>(t) - midpoint) / slope));
  });
}

FusionWeightPolicy FusionWeightPolicy::oracle_optimal(
    const LinearGaussianWorld& world, const NoiseSchedule& s) {
  // Irreducible MSE of the back-projection over the world's randomness:
  // E||x0 - A^T y||^2 with x0 ~ N(mu0, Sigma0) averaged in.
  const Eigen::Index N = world.signal_dim();
  const Eigen::MatrixXd D =
      Eigen::MatrixXd::Identity(N, N) - world.A.transpose() * world.A;
  const double irreducible = (D * world.Sigma0 * D.transpose()).trace() +
                             (D * world.mu0).squaredNorm() +
                             world.sigma_y * world.sigma_y *
                                 world.A.squaredNorm();
  std::vector<double> sig2(static_cast<std::size_t>(s.steps()) + 1, 0.0);
  for (int t = 1; t <= s.steps(); ++t) sig2[t] = s.tilde_sigma2(t);
  const double n = static_cast<double>(N);
  return FusionWeightPolicy(
      Kind::OracleOptimal, [irreducible, n, sig2 = std::move(sig2)](int t) {
        const double v = sig2.at(static_cast<std::size_t>(t)) * n;
        return v / (irreducible + v);
      });
}

double FusionWeightPolicy::weight(int t) const {
  const double w = fn_(t);
  return std::min(1.0, std::max(0.0, w));
}

Eigen::VectorXd ConvexFuser::fuse(const Eigen::VectorXd& x0_ir,
                                  const Eigen::VectorXd& x0_d, int t) const {
  if (x0_ir.size() != x0_d.size())
    throw std::invalid_argument("fuse: dimension mismatch");
  const double w = policy_.weight(t);
  if (w == 1.0) return x0_ir;
  if (w == 0.0) return x0_d;
  return w * x0_ir + (1.0 - w) * x0_d;
}

ExactFuser::ExactFuser(const LinearGaussianWorld& world,
                       const NoiseSchedule& s)
    : schedule_(s), mu0_(world.mu0) {
  const Eigen::Index N = world.signal_dim();
  const Eigen::LLT<Eigen::MatrixXd> llt(world.Sigma0);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ExactFuser: Sigma0 not SPD");
  prior_precision_ = llt.solve(Eigen::MatrixXd::Identity(N, N));
  prior_precision_ = 0.5 * (prior_precision_ + prior_precision_.transpose().eval());
  obs_precision_ = prior_precision_ + world.A.transpose() * world.A /
                                          (world.sigma_y * world.sigma_y);
  prior_info_ = prior_precision_ * mu0_;
}

// Product-of-experts identity for jointly Gaussian conditionals:
//   Prec(x0|y,x_t) = Prec(x0|y) + Prec(x0|x_t) - Prec(x0)
// and likewise for the information vectors, so the joint conditional mean
// is recovered from the two marginal conditional means alone.
Eigen::VectorXd ExactFuser::fuse(const Eigen::VectorXd& x0_ir,
                                 const Eigen::VectorXd& x0_d, int t) const {
  if (x0_ir.size() != x0_d.size() || x0_ir.size() != mu0_.size())
    throw std::invalid_argument("fuse: dimension mismatch");
  const double ab = schedule_.alpha_bar(t);
  const Eigen::Index N = mu0_.size();
  const Eigen::MatrixXd latent_precision =
      prior_precision_ +
      (ab / (1.0 - ab)) * Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd joint = obs_precision_ + latent_precision - prior_precision_;
  joint = 0.5 * (joint + joint.transpose().eval());
  const Eigen::VectorXd info =
      obs_precision_ * x0_ir + latent_precision * x0_d - prior_info_;
  return Eigen::LLT<Eigen::MatrixXd>(joint).solve(info);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

}  // namespace

EstimatorStack make_stack(const std::string& denoiser_name,
                          const std::string& restorer_name,
                          const std::string& fuser_name,
                          const LinearGaussianWorld& world,
                          const NoiseSchedule& s, int default_tau) {
  EstimatorStack stack;

  if (denoiser_name == "identity")
    stack.denoiser = std::make_shared<IdentityDenoiser>();
  else if (denoiser_name == "gaussian")
    stack.denoiser = std::make_shared<GaussianDenoiser>(world);
  else
    throw std::invalid_argument("unknown denoiser: " + denoiser_name);

  if (restorer_name == "backprojection")
    stack.restorer = std::make_shared<BackprojectionRestorer>(world);
  else if (restorer_name == "mmse")
    stack.restorer = std::make_shared<MmseRestorer>(world);
  else
    throw std::invalid_argument("unknown restorer: " + restorer_name);

  if (fuser_name == "exact") {
    stack.fuser = std::make_shared<ExactFuser>(world, s);
    return stack;
  }
  const auto parts = split(fuser_name, ':');
  if (parts[0] != "convex")
    throw std::invalid_argument("unknown fuser: " + fuser_name);
  if (parts.size() < 2)
    throw std::invalid_argument("convex fuser needs a policy, e.g. convex:logistic");
  const std::string& policy = parts[1];
  if (policy == "constant") {
    if (parts.size() != 3)
      throw std::invalid_argument("convex:constant needs a weight, e.g. convex:constant:0.5");
    stack.fuser = std::make_shared<ConvexFuser>(
        FusionWeightPolicy::constant(std::stod(parts[2])));
  } else if (policy == "logistic") {
    double midpoint = static_cast<double>(default_tau);
    double slope = std::max(1.0, static_cast<double>(default_tau) / 5.0);
    if (parts.size() == 4) {
      midpoint = std::stod(parts[2]);
      slope = std::stod(parts[3]);
    } else if (parts.size() != 2) {
      throw std::invalid_argument("convex:logistic takes either no or two parameters");
    }
    stack.fuser =
        std::make_shared<ConvexFuser>(FusionWeightPolicy::logistic(midpoint, slope));
  } else if (policy == "oracle") {
    stack.fuser = std::make_shared<ConvexFuser>(
        FusionWeightPolicy::oracle_optimal(world, s));
  } else {
    throw std::invalid_argument("unknown convex fusion policy: " + policy);
  }
  return stack;
}

}  // namespace dpir
