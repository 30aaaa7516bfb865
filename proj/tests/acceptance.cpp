// Acceptance suite: runs every exit criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exits nonzero if any fail.
//
// Usage: dpir_acceptance [--cli <path-to-dpir-binary>]
// The CLI path is needed only for the determinism criterion (10).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpir/costmodel.hpp"
#include "dpir/estimators.hpp"
#include "dpir/io.hpp"
#include "dpir/kernels.hpp"
#include "dpir/oracle.hpp"
#include "dpir/sampler.hpp"
#include "dpir/schedule.hpp"
#include "dpir/verify.hpp"

using namespace dpir;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  std::string name;
  bool pass;
  double seconds;
  std::string detail;
};

std::vector<Criterion> g_results;

template <typename Fn>
void run_criterion(int id, const std::string& name, double time_limit_s,
                   Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    detail = fn(pass);
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (time_limit_s > 0.0 && secs > time_limit_s) {
    pass = false;
    detail += " [exceeded " + format_double(time_limit_s) + " s budget]";
  }
  g_results.push_back({id, name, pass, secs, detail});
  std::printf("[%s] criterion %d (%s): %s [%.1f s]\n", pass ? "PASS" : "FAIL",
              id, name.c_str(), detail.c_str(), secs);
  std::fflush(stdout);
}

std::string report_detail(const VerifyReport& r) {
  std::string s = "max observed " + format_double(r.max_observed());
  for (const auto& c : r.checks)
    if (!c.pass) s += "; FAILED " + c.name;
  return s;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string strip_runtime_line(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.find("runtime_ms") == std::string::npos) out << line << '\n';
  return out.str();
}

// ---- criterion 7: posterior recovery ----------------------------------

struct MomentAccumulator {
  Eigen::VectorXd sum, sumsq;
  long n = 0;
  explicit MomentAccumulator(int dim)
      : sum(Eigen::VectorXd::Zero(dim)), sumsq(Eigen::VectorXd::Zero(dim)) {}
  void add(const Eigen::VectorXd& x) {
    sum += x;
    sumsq += x.cwiseAbs2();
    ++n;
  }
  Eigen::VectorXd mean() const { return sum / static_cast<double>(n); }
  Eigen::VectorXd variance() const {
    return sumsq / static_cast<double>(n) - mean().cwiseAbs2();
  }
};

std::string posterior_recovery(bool& pass) {
  const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2);
  const auto world = make_world(3, 4, 2024);
  const auto stack = make_stack("gaussian", "mmse", "exact", world, s, 250);
  const auto data = draw_dataset(world, 1, 2025);
  const auto post = cond_x0_given_y(world, data[0].y);

  SamplerConfig full_cfg;
  full_cfg.mode = SamplerMode::Full;
  full_cfg.seed = 99;
  full_cfg.record_states = false;
  SamplerConfig acc_cfg = full_cfg;
  acc_cfg.mode = SamplerMode::Accelerated;
  acc_cfg.tau = 250;

  const long runs = 10000;
  MomentAccumulator full(3), acc(3);
  for (long r = 0; r < runs; ++r) {
    full.add(sample_full(stack, world, data[0].y, full_cfg, s, r).x0_final);
    acc.add(sample_accelerated(stack, world, data[0].y, acc_cfg, s, r).x0_final);
  }

  const Eigen::VectorXd se_full =
      (full.variance() / static_cast<double>(runs)).cwiseSqrt();
  const Eigen::VectorXd se_acc =
      (acc.variance() / static_cast<double>(runs)).cwiseSqrt();

  double max_mean_z = 0.0, max_pair_z = 0.0;
  for (int i = 0; i < 3; ++i) {
    max_mean_z = std::max(
        max_mean_z, std::abs(full.mean()[i] - post.mean[i]) / se_full[i]);
    max_mean_z = std::max(
        max_mean_z, std::abs(acc.mean()[i] - post.mean[i]) / se_acc[i]);
    const double se2 = se_full[i] * se_full[i] + se_acc[i] * se_acc[i];
    max_pair_z = std::max(max_pair_z, std::abs(full.mean()[i] - acc.mean()[i]) /
                                          std::sqrt(se2));
  }
  const double trace_rel =
      std::abs(full.variance().sum() - post.cov.trace()) / post.cov.trace();

  pass = max_mean_z < 3.0 && trace_rel < 0.05 && max_pair_z < 4.0;
  return "mean z " + format_double(max_mean_z) + " (<3), full cov-trace rel " +
         format_double(trace_rel) + " (<0.05), full-vs-accel z " +
         format_double(max_pair_z) + " (<4)";
}

// ---- criterion 10: CLI determinism -------------------------------------

std::string cli_determinism(const std::string& cli, bool& pass) {
  if (cli.empty()) {
    pass = false;
    return "no --cli path given";
  }
  const fs::path dir = fs::temp_directory_path() / "dpir_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  {
    std::ofstream f(cfg);
    f << R"({
  "schedule": {"T": 80, "beta_start": 1e-4, "beta_end": 2e-2},
  "world": {"N": 2, "M": 3, "seed": 5},
  "estimators": {"denoiser": "gaussian", "restorer": "mmse", "fuser": "exact"},
  "sampler": {"mode": "accelerated", "tau": 12, "seed": 41, "num_samples": 6}
})";
  }
  const auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const std::string c = " --config " + cfg.string();
  if (!run("sample" + c + " --output-dir " + (dir / "a").string()) ||
      !run("sample" + c + " --output-dir " + (dir / "b").string()) ||
      !run("sweep-tau" + c + " --taus 0,6,12 --output-dir " +
           (dir / "sa").string()) ||
      !run("sweep-tau" + c + " --taus 0,6,12 --output-dir " +
           (dir / "sb").string())) {
    pass = false;
    return "CLI invocation failed";
  }
  const bool trace_same =
      read_file(dir / "a" / "trace.csv") == read_file(dir / "b" / "trace.csv");
  const bool summary_same =
      strip_runtime_line(read_file(dir / "a" / "summary.json")) ==
      strip_runtime_line(read_file(dir / "b" / "summary.json"));
  const bool sweep_same =
      read_file(dir / "sa" / "sweep.csv") == read_file(dir / "sb" / "sweep.csv");
  pass = trace_same && summary_same && sweep_same;
  std::string d = "trace ";
  d += trace_same ? "identical" : "DIFFERS";
  d += ", summary (sans runtime) ";
  d += summary_same ? "identical" : "DIFFERS";
  d += ", sweep ";
  d += sweep_same ? "identical" : "DIFFERS";
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli_path;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--cli") cli_path = argv[i + 1];

  run_criterion(1, "merged kernel equals brute-force composition", 5.0,
                [](bool& pass) {
                  const auto r = verify_merged_kernel(1000, 7, 200, 1e-10);
                  pass = r.passed();
                  return report_detail(r);
                });

  run_criterion(2, "conditional score identity", 10.0, [](bool& pass) {
    const auto r = verify_score_identity(100, 11, 1e-8);
    pass = r.passed();
    return report_detail(r);
  });

  run_criterion(3, "restorer dominance threshold", 60.0, [](bool& pass) {
    const auto r = verify_restorer_dominance(20, 13, 100000);
    pass = r.passed();
    return report_detail(r);
  });

  run_criterion(4, "trace identity vs Monte Carlo", 30.0, [](bool& pass) {
    const auto r = verify_trace_identity(6, 10, 1000000, 17);
    pass = r.passed();
    return report_detail(r);
  });

  run_criterion(5, "NFE accounting", 30.0, [](bool& pass) {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2);
    const auto world = make_world(2, 3, 19);
    const auto stack = make_stack("gaussian", "mmse", "exact", world, s, 250);
    const auto data = draw_dataset(world, 1, 20);
    SamplerConfig cfg;
    cfg.seed = 21;
    cfg.record_states = false;

    cfg.mode = SamplerMode::Accelerated;
    cfg.tau = 5;
    const long nfe_acc =
        sample_accelerated(stack, world, data[0].y, cfg, s).nfe_total;

    cfg.mode = SamplerMode::AcceleratedDdim;
    cfg.tau = 250;
    cfg.stride = 5;
    const long nfe_ddim =
        sample_accelerated_ddim(stack, world, data[0].y, cfg, s).nfe_total;

    cfg.mode = SamplerMode::Full;
    const long nfe_full = sample_full(stack, world, data[0].y, cfg, s).nfe_total;

    pass = nfe_acc == 6 && nfe_ddim == 51 && nfe_full == 1001;
    return "tau=5 -> " + std::to_string(nfe_acc) +
           " (want 6), tau=250/stride=5 -> " + std::to_string(nfe_ddim) +
           " (want 51), full -> " + std::to_string(nfe_full) + " (want 1001)";
  });

  run_criterion(6, "cost table reproduction", 5.0, [](bool& pass) {
    const double want[] = {604.8, 2405.2, 48.0, 23.4};
    const auto table = reference_cost_table();
    pass = table.size() == 4;
    std::string d;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double got = total_cost(table[i].model, table[i].nfe);
      if (got != want[i]) pass = false;
      if (!d.empty()) d += ", ";
      d += format_double(got);
    }
    return d + " (exact match required)";
  });

  run_criterion(7, "posterior recovery, full and accelerated", 120.0,
                posterior_recovery);

  run_criterion(8, "absorbing-schedule start equivalence", 5.0, [](bool& pass) {
    std::vector<double> betas;
    for (int i = 0; i < 11; ++i) betas.push_back(0.05 + 0.035 * i);
    betas.push_back(1.0);
    const auto s = NoiseSchedule::from_betas(betas, VarianceParam::TildeBeta);
    double worst = 0.0;
    bool xt_coeff_zero = true;
    for (int tau = 0; tau < s.steps(); ++tau) {
      const auto c = merged_transition(s, s.steps(), s.steps() - tau);
      if (c.c_xt != 0.0) xt_coeff_zero = false;
      worst = std::max(worst, std::abs(c.c_x0 - std::sqrt(s.alpha_bar(tau))) /
                                  std::sqrt(s.alpha_bar(tau)));
      const double want_var = 1.0 - s.alpha_bar(tau);
      if (want_var > 0.0)
        worst = std::max(worst, std::abs(c.var - want_var) / want_var);
      else
        worst = std::max(worst, std::abs(c.var));
    }
    pass = worst < 1e-10 && xt_coeff_zero;
    return "max rel err " + format_double(worst) +
           (xt_coeff_zero ? ", x_T coefficient exactly 0" : ", x_T coefficient NONZERO");
  });

  run_criterion(9, "DDIM eta=1 equals ancestral sampling", 60.0, [](bool& pass) {
    const auto r = verify_ddim_equivalence(23, 100000, 25);
    pass = r.passed();
    return report_detail(r);
  });

  run_criterion(10, "CLI determinism", 60.0, [&](bool& pass) {
    return cli_determinism(cli_path, pass);
  });

  int failures = 0;
  for (const auto& c : g_results)
    if (!c.pass) ++failures;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(g_results.size()) - failures,
              g_results.size());
  return failures == 0 ? 0 : 1;
}
