#include "dpir/sampler.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "dpir/io.hpp"
#include "dpir/rng.hpp"

namespace dpir {

namespace {

// Dataset draws use a stream id space disjoint from per-run streams, so a
// run never replays the noise that generated its own data.
constexpr std::uint64_t kDatasetStreamBase = 0x8000000000000000ull;

struct RunRecorder {
  SampleTrace trace;
  bool record = true;

  void state(int t, const Eigen::VectorXd& x) {
    if (record) {
      trace.states.emplace_back(t, x);
      trace.state_nfe.push_back({trace.nfe_denoiser, trace.nfe_fuser});
    }
  }
};

// x0 estimate at timestep t: denoise the rescaled latent, then fuse with
// the cached restorer output.
Eigen::VectorXd estimate_x0(const EstimatorStack& stack,
                            const NoiseSchedule& s, RunRecorder& rec,
                            const Eigen::VectorXd& x0_ir,
                            const Eigen::VectorXd& x, int t) {
  const Eigen::VectorXd x_tilde = x / std::sqrt(s.alpha_bar(t));
  const Eigen::VectorXd x0_d = stack.denoiser->denoise(x_tilde, s.tilde_sigma(t));
  ++rec.trace.nfe_denoiser;
  Eigen::VectorXd x0_hat = stack.fuser->fuse(x0_ir, x0_d, t);
  ++rec.trace.nfe_fuser;
  return x0_hat;
}

// Fused reverse steps from t = from down to 0. No noise at the final step.
void run_fused_steps(const EstimatorStack& stack, const NoiseSchedule& s,
                     RunRecorder& rec, const Eigen::VectorXd& x0_ir,
                     Eigen::VectorXd& x, int from, NormalStream& stream) {
  for (int t = from; t >= 1; --t) {
    const Eigen::VectorXd x0_hat = estimate_x0(stack, s, rec, x0_ir, x, t);
    if (t > 1)
      x = posterior_step(s, x, x0_hat, t, stream.vector(x.size()));
    else
      x = posterior_step(s, x, x0_hat, t);
    rec.state(t - 1, x);
  }
}

void finish(RunRecorder& rec, Eigen::VectorXd x) {
  rec.trace.x0_final = std::move(x);
  rec.trace.nfe_total = rec.trace.nfe_denoiser + rec.trace.nfe_restorer;
}

Eigen::VectorXd cached_restore(const EstimatorStack& stack, RunRecorder& rec,
                               const Eigen::VectorXd& y) {
  Eigen::VectorXd x0_ir = stack.restorer->restore(y);
  ++rec.trace.nfe_restorer;
  rec.trace.restorer_cache = x0_ir;
  return x0_ir;
}

void check_tau(const SamplerConfig& cfg, const NoiseSchedule& s) {
  if (cfg.tau < 0 || cfg.tau > s.steps())
    throw std::invalid_argument("sampler: tau outside 0..T");
}

}  // namespace

SampleTrace sample_full(const EstimatorStack& stack,
                        const LinearGaussianWorld& world,
                        const Eigen::VectorXd& y, const SamplerConfig& cfg,
                        const NoiseSchedule& s, std::uint64_t stream_id) {
  RunRecorder rec;
  rec.record = cfg.record_states;
  NormalStream stream(cfg.seed, stream_id);
  const Eigen::VectorXd x0_ir = cached_restore(stack, rec, y);

  Eigen::VectorXd x = stream.vector(world.signal_dim());
  rec.state(s.steps(), x);
  run_fused_steps(stack, s, rec, x0_ir, x, s.steps(), stream);
  finish(rec, std::move(x));
  return rec.trace;
}

SampleTrace sample_accelerated(const EstimatorStack& stack,
                               const LinearGaussianWorld& world,
                               const Eigen::VectorXd& y,
                               const SamplerConfig& cfg,
                               const NoiseSchedule& s,
                               std::uint64_t stream_id) {
  check_tau(cfg, s);
  RunRecorder rec;
  rec.record = cfg.record_states;
  NormalStream stream(cfg.seed, stream_id);
  const Eigen::VectorXd x0_ir = cached_restore(stack, rec, y);
  const int T = s.steps();

  Eigen::VectorXd x = stream.vector(world.signal_dim());
  rec.state(T, x);
  if (cfg.tau == T) {
    // Nothing to merge; degenerates to full fused sampling.
    rec.trace.merged_jump_skipped = true;
  } else {
    const auto c = merged_transition(s, T, T - cfg.tau);
    x = c.c_x0 * x0_ir + c.c_xt * x +
        std::sqrt(c.var) * stream.vector(x.size());
    rec.state(cfg.tau, x);
  }
  run_fused_steps(stack, s, rec, x0_ir, x, cfg.tau, stream);
  finish(rec, std::move(x));
  return rec.trace;
}

SampleTrace sample_accelerated_ddim(const EstimatorStack& stack,
                                    const LinearGaussianWorld& world,
                                    const Eigen::VectorXd& y,
                                    const SamplerConfig& cfg,
                                    const NoiseSchedule& s,
                                    std::uint64_t stream_id) {
  check_tau(cfg, s);
  if (cfg.stride < 1)
    throw std::invalid_argument("sampler: DDIM stride must be >= 1");
  if (cfg.stride > cfg.tau)
    throw std::invalid_argument("sampler: DDIM stride exceeds tau");
  RunRecorder rec;
  rec.record = cfg.record_states;
  NormalStream stream(cfg.seed, stream_id);
  const Eigen::VectorXd x0_ir = cached_restore(stack, rec, y);
  const int T = s.steps();

  Eigen::VectorXd x = stream.vector(world.signal_dim());
  rec.state(T, x);
  if (cfg.tau == T) {
    rec.trace.merged_jump_skipped = true;
  } else {
    const auto c = merged_transition(s, T, T - cfg.tau);
    x = c.c_x0 * x0_ir + c.c_xt * x +
        std::sqrt(c.var) * stream.vector(x.size());
    rec.state(cfg.tau, x);
  }
  rec.trace.ddim_grid_shortened = (cfg.tau % cfg.stride) != 0;

  int t = cfg.tau;
  while (t > 0) {
    const Eigen::VectorXd x0_hat = estimate_x0(stack, s, rec, x0_ir, x, t);
    const int t_next = std::max(t - cfg.stride, 0);
    if (cfg.eta > 0.0 && t_next > 0)
      x = ddim_step(s, x, x0_hat, t, t_next, cfg.eta, stream.vector(x.size()));
    else
      x = ddim_step(s, x, x0_hat, t, t_next, cfg.eta);
    rec.state(t_next, x);
    t = t_next;
  }
  finish(rec, std::move(x));
  return rec.trace;
}

SampleTrace sample_diffused_start(const EstimatorStack& stack,
                                  const LinearGaussianWorld& world,
                                  const Eigen::VectorXd& y,
                                  const SamplerConfig& cfg,
                                  const NoiseSchedule& s,
                                  std::uint64_t stream_id) {
  check_tau(cfg, s);
  RunRecorder rec;
  rec.record = cfg.record_states;
  NormalStream stream(cfg.seed, stream_id);
  const Eigen::VectorXd x0_ir = cached_restore(stack, rec, y);

  if (cfg.tau == 0) {
    rec.state(0, x0_ir);
    finish(rec, x0_ir);
    return rec.trace;
  }
  const double ab = s.alpha_bar(cfg.tau);
  Eigen::VectorXd x = std::sqrt(ab) * x0_ir +
                      std::sqrt(1.0 - ab) * stream.vector(world.signal_dim());
  rec.state(cfg.tau, x);
  run_fused_steps(stack, s, rec, x0_ir, x, cfg.tau, stream);
  finish(rec, std::move(x));
  return rec.trace;
}

SampleTrace sample(const EstimatorStack& stack, const LinearGaussianWorld& world,
                   const Eigen::VectorXd& y, const SamplerConfig& cfg,
                   const NoiseSchedule& s, std::uint64_t stream_id) {
  switch (cfg.mode) {
    case SamplerMode::Full:
      return sample_full(stack, world, y, cfg, s, stream_id);
    case SamplerMode::Accelerated:
      return sample_accelerated(stack, world, y, cfg, s, stream_id);
    case SamplerMode::AcceleratedDdim:
      return sample_accelerated_ddim(stack, world, y, cfg, s, stream_id);
    case SamplerMode::DiffusedStartBaseline:
      return sample_diffused_start(stack, world, y, cfg, s, stream_id);
  }
  throw std::logic_error("sample: unknown mode");
}

std::vector<WorldSample> draw_dataset(const LinearGaussianWorld& world, int n,
                                      std::uint64_t seed) {
  const Eigen::LLT<Eigen::MatrixXd> llt(world.Sigma0);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("draw_dataset: Sigma0 not SPD");
  const Eigen::MatrixXd L = llt.matrixL();
  std::vector<WorldSample> data;
  data.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    NormalStream stream(seed, kDatasetStreamBase + static_cast<std::uint64_t>(i));
    WorldSample ws;
    ws.x0 = world.mu0 + L * stream.vector(world.signal_dim());
    ws.y = world.A * ws.x0 + world.sigma_y * stream.vector(world.obs_dim());
    data.push_back(std::move(ws));
  }
  return data;
}

std::vector<TauSweepRow> sweep_tau(const EstimatorStack& stack,
                                   const LinearGaussianWorld& world,
                                   const std::vector<WorldSample>& dataset,
                                   const std::vector<int>& tau_list,
                                   const SamplerConfig& cfg,
                                   const NoiseSchedule& s) {
  if (tau_list.empty())
    throw std::invalid_argument("sweep_tau: empty tau list");
  if (dataset.empty())
    throw std::invalid_argument("sweep_tau: empty dataset");
  std::vector<TauSweepRow> rows;
  rows.reserve(tau_list.size());
  for (int tau : tau_list) {
    SamplerConfig row_cfg = cfg;
    row_cfg.mode = SamplerMode::Accelerated;
    row_cfg.tau = tau;
    row_cfg.record_states = false;
    TauSweepRow row;
    row.tau = tau;
    double mse_sum = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const SampleTrace trace = sample_accelerated(
          stack, world, dataset[i].y, row_cfg, s, static_cast<std::uint64_t>(i));
      mse_sum += (trace.x0_final - dataset[i].x0).squaredNorm() /
                 static_cast<double>(world.signal_dim());
      row.nfe = trace.nfe_total;
    }
    row.mse = mse_sum / static_cast<double>(dataset.size());
    rows.push_back(row);
  }
  return rows;
}

std::vector<StartComparisonRow> compare_starts(
    const EstimatorStack& stack, const LinearGaussianWorld& world,
    const std::vector<WorldSample>& dataset, const SamplerConfig& cfg,
    const NoiseSchedule& s) {
  std::vector<StartComparisonRow> rows;
  rows.reserve(dataset.size());
  SamplerConfig run_cfg = cfg;
  run_cfg.record_states = false;
  const double n = static_cast<double>(world.signal_dim());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    StartComparisonRow row;
    row.pair_index = static_cast<int>(i);
    const auto proposed = sample_accelerated(stack, world, dataset[i].y,
                                             run_cfg, s, i);
    const auto baseline = sample_diffused_start(stack, world, dataset[i].y,
                                                run_cfg, s, i);
    row.mse_proposed = (proposed.x0_final - dataset[i].x0).squaredNorm() / n;
    row.mse_baseline = (baseline.x0_final - dataset[i].x0).squaredNorm() / n;
    rows.push_back(row);
  }
  return rows;
}

void write_trace_csv(std::ostream& os, const SampleTrace& trace) {
  os << "step_index,t,nfe_denoiser,nfe_fuser";
  const Eigen::Index n =
      trace.states.empty() ? trace.x0_final.size() : trace.states[0].second.size();
  for (Eigen::Index i = 0; i < n; ++i) os << ",x[" << i << ']';
  os << '\n';
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    const auto& [t, x] = trace.states[k];
    os << k << ',' << t << ',' << trace.state_nfe[k][0] << ','
       << trace.state_nfe[k][1];
    for (Eigen::Index i = 0; i < x.size(); ++i)
      os << ',' << format_double(x[i]);
    os << '\n';
  }
}

}  // namespace dpir
