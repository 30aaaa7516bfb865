#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "dpir/oracle.hpp"
#include "dpir/schedule.hpp"

namespace dpir {

// The three estimator contracts the sampler composes. Implementations are
// immutable after construction and safe to evaluate concurrently.

// Maps (x_tilde, sigma_tilde) to an estimate of E[x0 | x_t], where
// x_tilde = x_t / sqrt(abar_t) carries noise stddev sigma_tilde.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Eigen::VectorXd denoise(const Eigen::VectorXd& x_tilde,
                                  double sigma_tilde) const = 0;
  virtual std::string_view name() const = 0;
};

// Maps an observation y to an estimate of E[x0 | y].
class Restorer {
 public:
  virtual ~Restorer() = default;
  virtual Eigen::VectorXd restore(const Eigen::VectorXd& y) const = 0;
  virtual std::string_view name() const = 0;
};

// Combines the restorer and denoiser estimates into an estimate of
// E[x0 | y, x_t].
class Fuser {
 public:
  virtual ~Fuser() = default;
  virtual Eigen::VectorXd fuse(const Eigen::VectorXd& x0_ir,
                               const Eigen::VectorXd& x0_d, int t) const = 0;
  virtual std::string_view name() const = 0;
};

// Passes the noisy input through unchanged.
class IdentityDenoiser final : public Denoiser {
 public:
  Eigen::VectorXd denoise(const Eigen::VectorXd& x_tilde,
                          double sigma_tilde) const override;
  std::string_view name() const override { return "identity"; }
};

// Exact conditional mean under the world prior: the MMSE denoiser.
class GaussianDenoiser final : public Denoiser {
 public:
  explicit GaussianDenoiser(LinearGaussianWorld world)
      : world_(std::move(world)) {}
  Eigen::VectorXd denoise(const Eigen::VectorXd& x_tilde,
                          double sigma_tilde) const override;
  std::string_view name() const override { return "gaussian"; }

 private:
  LinearGaussianWorld world_;
};

// A^T y.
class BackprojectionRestorer final : public Restorer {
 public:
  explicit BackprojectionRestorer(const LinearGaussianWorld& world)
      : At_(world.A.transpose()) {}
  Eigen::VectorXd restore(const Eigen::VectorXd& y) const override;
  std::string_view name() const override { return "backprojection"; }

 private:
  Eigen::MatrixXd At_;
};

// Exact Gaussian posterior mean E[x0 | y].
class MmseRestorer final : public Restorer {
 public:
  explicit MmseRestorer(LinearGaussianWorld world) : world_(std::move(world)) {}
  Eigen::VectorXd restore(const Eigen::VectorXd& y) const override;
  std::string_view name() const override { return "mmse"; }

 private:
  LinearGaussianWorld world_;
};

// Time-dependent fusion weight w(t) in [0, 1]; w = 1 trusts the restorer.
class FusionWeightPolicy {
 public:
  enum class Kind { Constant, Logistic, OracleOptimal };

  static FusionWeightPolicy constant(double w);
  // w(t) = 1 / (1 + exp(-(t - midpoint) / slope)).
  static FusionWeightPolicy logistic(double midpoint, double slope);
  // Scalar weight minimizing the expected squared error of
  // w * A^T y + (1 - w) * x_tilde_t over the world's joint randomness:
  // w*(t) = s~^2 N / (irreducible backprojection MSE + s~^2 N).
  static FusionWeightPolicy oracle_optimal(const LinearGaussianWorld& world,
                                           const NoiseSchedule& s);

  double weight(int t) const;
  Kind kind() const { return kind_; }

 private:
  FusionWeightPolicy(Kind k, std::function<double(int)> fn)
      : kind_(k), fn_(std::move(fn)) {}
  Kind kind_;
  std::function<double(int)> fn_;
};

// w(t) * x0_ir + (1 - w(t)) * x0_d.
class ConvexFuser final : public Fuser {
 public:
  explicit ConvexFuser(FusionWeightPolicy policy) : policy_(std::move(policy)) {}
  Eigen::VectorXd fuse(const Eigen::VectorXd& x0_ir,
                       const Eigen::VectorXd& x0_d, int t) const override;
  std::string_view name() const override { return "convex"; }
  const FusionWeightPolicy& policy() const { return policy_; }

 private:
  FusionWeightPolicy policy_;
};

// Exact E[x0 | y, x_t], reconstructed from the two marginal conditional
// means by precision-space fusion; valid when its inputs are the exact
// E[x0 | y] and E[x0 | x_t] (MMSE restorer + Gaussian denoiser).
class ExactFuser final : public Fuser {
 public:
  ExactFuser(const LinearGaussianWorld& world, const NoiseSchedule& s);
  Eigen::VectorXd fuse(const Eigen::VectorXd& x0_ir,
                       const Eigen::VectorXd& x0_d, int t) const override;
  std::string_view name() const override { return "exact"; }

 private:
  const NoiseSchedule schedule_;
  Eigen::MatrixXd prior_precision_;      // Sigma0^-1
  Eigen::MatrixXd obs_precision_;        // Sigma0^-1 + A^T A / sigma_y^2
  Eigen::VectorXd prior_info_;           // Sigma0^-1 mu0
  Eigen::VectorXd mu0_;
};

struct EstimatorStack {
  std::shared_ptr<const Denoiser> denoiser;
  std::shared_ptr<const Restorer> restorer;
  std::shared_ptr<const Fuser> fuser;
};

// Builds a stack from the config-level names:
//   denoiser: "identity" | "gaussian"
//   restorer: "backprojection" | "mmse"
//   fuser:    "exact" | "convex:constant:<w>" | "convex:logistic[:<t0>:<slope>]"
//             | "convex:oracle"
// default_tau seeds the logistic midpoint when not given explicitly.
EstimatorStack make_stack(const std::string& denoiser_name,
                          const std::string& restorer_name,
                          const std::string& fuser_name,
                          const LinearGaussianWorld& world,
                          const NoiseSchedule& s, int default_tau);

}  // namespace dpir
