#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dpir/estimators.hpp"
#include "dpir/kernels.hpp"
#include "dpir/oracle.hpp"
#include "dpir/schedule.hpp"

namespace dpir {

enum class SamplerMode { Full, Accelerated, AcceleratedDdim, DiffusedStartBaseline };

struct SamplerConfig {
  SamplerMode mode = SamplerMode::Accelerated;
  int tau = 250;      // activation timestep for the denoiser + fuser branch
  int stride = 5;     // DDIM grid stride
  double eta = 0.0;   // DDIM noise scale
  std::uint64_t seed = 0;
  int num_samples = 1;
  bool record_states = true;  // heavy Monte Carlo loops switch this off
};

struct SampleTrace {
  std::vector<std::pair<int, Eigen::VectorXd>> states;  // (t, x_t) visited
  std::vector<std::array<long, 2>> state_nfe;  // (denoiser, fuser) per state
  long nfe_denoiser = 0;
  long nfe_restorer = 0;
  long nfe_fuser = 0;
  long nfe_total = 0;  // denoiser steps + the single restorer evaluation
  Eigen::VectorXd x0_final;
  Eigen::VectorXd restorer_cache;  // the cached E[x0|y] estimate, for audit
  bool merged_jump_skipped = false;   // tau == T: nothing to skip
  bool ddim_grid_shortened = false;   // stride did not divide tau
};

// Reverse sampling through all T steps with the full estimator stack.
SampleTrace sample_full(const EstimatorStack& stack,
                        const LinearGaussianWorld& world,
                        const Eigen::VectorXd& y, const SamplerConfig& cfg,
                        const NoiseSchedule& s, std::uint64_t stream = 0);

// Single merged jump from T to tau with x0 approximated by the cached
// restorer output, then tau fused reverse steps.
SampleTrace sample_accelerated(const EstimatorStack& stack,
                               const LinearGaussianWorld& world,
                               const Eigen::VectorXd& y,
                               const SamplerConfig& cfg,
                               const NoiseSchedule& s,
                               std::uint64_t stream = 0);

// Merged jump to tau, then DDIM updates on the stride grid down to 0.
SampleTrace sample_accelerated_ddim(const EstimatorStack& stack,
                                    const LinearGaussianWorld& world,
                                    const Eigen::VectorXd& y,
                                    const SamplerConfig& cfg,
                                    const NoiseSchedule& s,
                                    std::uint64_t stream = 0);

// Baseline: forward-diffuse the restorer output to level tau, then tau
// fused reverse steps.
SampleTrace sample_diffused_start(const EstimatorStack& stack,
                                  const LinearGaussianWorld& world,
                                  const Eigen::VectorXd& y,
                                  const SamplerConfig& cfg,
                                  const NoiseSchedule& s,
                                  std::uint64_t stream = 0);

// Dispatch on cfg.mode.
SampleTrace sample(const EstimatorStack& stack, const LinearGaussianWorld& world,
                   const Eigen::VectorXd& y, const SamplerConfig& cfg,
                   const NoiseSchedule& s, std::uint64_t stream = 0);

// A (ground truth, observation) pair drawn from the world.
struct WorldSample {
  Eigen::VectorXd x0;
  Eigen::VectorXd y;
};

// Deterministic dataset under (seed, index); x0 ~ N(mu0, Sigma0),
// y = A x0 + sigma_y n.
std::vector<WorldSample> draw_dataset(const LinearGaussianWorld& world, int n,
                                      std::uint64_t seed);

struct TauSweepRow {
  int tau = 0;
  double mse = 0.0;
  long nfe = 0;
};

// Average reconstruction MSE of the accelerated sampler over the dataset,
// one row per tau. Deterministic under cfg.seed.
std::vector<TauSweepRow> sweep_tau(const EstimatorStack& stack,
                                   const LinearGaussianWorld& world,
                                   const std::vector<WorldSample>& dataset,
                                   const std::vector<int>& tau_list,
                                   const SamplerConfig& cfg,
                                   const NoiseSchedule& s);

struct StartComparisonRow {
  int pair_index = 0;
  double mse_proposed = 0.0;  // merged-jump start
  double mse_baseline = 0.0;  // forward-diffused start
};

// Seed-matched paired runs of the proposed merged-jump start against the
// diffused-start baseline.
std::vector<StartComparisonRow> compare_starts(
    const EstimatorStack& stack, const LinearGaussianWorld& world,
    const std::vector<WorldSample>& dataset, const SamplerConfig& cfg,
    const NoiseSchedule& s);

// Header: step_index,t,nfe_denoiser,nfe_fuser,x[0],x[1],...
void write_trace_csv(std::ostream& os, const SampleTrace& trace);

}  // namespace dpir
