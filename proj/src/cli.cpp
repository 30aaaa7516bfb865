#include "dpir/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpir/costmodel.hpp"
#include "dpir/estimators.hpp"
#include "dpir/io.hpp"
#include "dpir/metrics.hpp"
#include "dpir/oracle.hpp"
#include "dpir/sampler.hpp"
#include "dpir/schedule.hpp"
#include "dpir/verify.hpp"

namespace dpir::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  VarianceParam vp = VarianceParam::Beta;

  std::optional<std::string> world_file;
  int N = 3;
  int M = 4;
  std::uint64_t world_seed = 1;
  double spectral_cap = 0.9;

  std::string denoiser = "gaussian";
  std::string restorer = "mmse";
  std::string fuser = "exact";

  SamplerConfig sampler;
  std::string output_dir = "out";

  std::string canonical;  // resolved config text; hashed into summaries
};

void reject_unknown_keys(const json& obj, const char* section,
                         std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok)
      throw ConfigError(std::string("unknown key '") + key + "' in " + section);
  }
}

SamplerMode parse_mode(const std::string& name) {
  if (name == "full") return SamplerMode::Full;
  if (name == "accelerated") return SamplerMode::Accelerated;
  if (name == "accelerated_ddim") return SamplerMode::AcceleratedDdim;
  if (name == "diffused_start") return SamplerMode::DiffusedStartBaseline;
  throw ConfigError("unknown sampler mode '" + name + "'");
}

const char* mode_name(SamplerMode m) {
  switch (m) {
    case SamplerMode::Full: return "full";
    case SamplerMode::Accelerated: return "accelerated";
    case SamplerMode::AcceleratedDdim: return "accelerated_ddim";
    case SamplerMode::DiffusedStartBaseline: return "diffused_start";
  }
  return "?";
}

VarianceParam parse_variance_param(const std::string& name) {
  if (name == "beta") return VarianceParam::Beta;
  if (name == "tilde_beta") return VarianceParam::TildeBeta;
  throw ConfigError("unknown variance_param '" + name + "'");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  ExperimentConfig cfg;
  reject_unknown_keys(j, "config",
                      {"schedule", "world", "estimators", "sampler", "output_dir"});

  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown_keys(s, "schedule",
                        {"T", "beta_start", "beta_end", "variance_param"});
    cfg.T = s.value("T", cfg.T);
    cfg.beta_start = s.value("beta_start", cfg.beta_start);
    cfg.beta_end = s.value("beta_end", cfg.beta_end);
    if (s.contains("variance_param"))
      cfg.vp = parse_variance_param(s.at("variance_param").get<std::string>());
  }
  if (j.contains("world")) {
    const auto& w = j.at("world");
    reject_unknown_keys(w, "world", {"file", "N", "M", "seed", "spectral_cap"});
    if (w.contains("file")) {
      cfg.world_file = w.at("file").get<std::string>();
    } else {
      cfg.N = w.value("N", cfg.N);
      cfg.M = w.value("M", cfg.M);
      cfg.world_seed = w.value("seed", cfg.world_seed);
      cfg.spectral_cap = w.value("spectral_cap", cfg.spectral_cap);
    }
  }
  if (j.contains("estimators")) {
    const auto& e = j.at("estimators");
    reject_unknown_keys(e, "estimators", {"denoiser", "restorer", "fuser"});
    cfg.denoiser = e.value("denoiser", cfg.denoiser);
    cfg.restorer = e.value("restorer", cfg.restorer);
    cfg.fuser = e.value("fuser", cfg.fuser);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    reject_unknown_keys(
        s, "sampler", {"mode", "tau", "stride", "eta", "seed", "num_samples"});
    if (s.contains("mode"))
      cfg.sampler.mode = parse_mode(s.at("mode").get<std::string>());
    cfg.sampler.tau = s.value("tau", cfg.sampler.tau);
    cfg.sampler.stride = s.value("stride", cfg.sampler.stride);
    cfg.sampler.eta = s.value("eta", cfg.sampler.eta);
    cfg.sampler.seed = s.value("seed", cfg.sampler.seed);
    cfg.sampler.num_samples = s.value("num_samples", cfg.sampler.num_samples);
  }
  cfg.output_dir = j.value("output_dir", cfg.output_dir);

  // Environment override for the run seed only.
  if (const char* env = std::getenv("DPIR_SEED")) {
    try {
      cfg.sampler.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("DPIR_SEED is not an unsigned integer");
    }
  }

  // Canonical resolved form, independent of key order in the input file.
  json resolved;
  resolved["schedule"] = {{"T", cfg.T},
                          {"beta_start", cfg.beta_start},
                          {"beta_end", cfg.beta_end},
                          {"variance_param",
                           cfg.vp == VarianceParam::Beta ? "beta" : "tilde_beta"}};
  if (cfg.world_file)
    resolved["world"] = {{"file", *cfg.world_file}};
  else
    resolved["world"] = {{"N", cfg.N},
                         {"M", cfg.M},
                         {"seed", cfg.world_seed},
                         {"spectral_cap", cfg.spectral_cap}};
  resolved["estimators"] = {{"denoiser", cfg.denoiser},
                            {"restorer", cfg.restorer},
                            {"fuser", cfg.fuser}};
  resolved["sampler"] = {{"mode", mode_name(cfg.sampler.mode)},
                         {"tau", cfg.sampler.tau},
                         {"stride", cfg.sampler.stride},
                         {"eta", cfg.sampler.eta},
                         {"seed", cfg.sampler.seed},
                         {"num_samples", cfg.sampler.num_samples}};
  resolved["output_dir"] = cfg.output_dir;
  cfg.canonical = resolved.dump();
  return cfg;
}

LinearGaussianWorld load_world(const ExperimentConfig& cfg) {
  if (cfg.world_file) {
    std::ifstream in(*cfg.world_file);
    if (!in) throw ConfigError("cannot open world file '" + *cfg.world_file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return world_from_json(ss.str());
  }
  return make_world(cfg.N, cfg.M, cfg.world_seed, cfg.spectral_cap);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

int run_sample(const std::string& config_path,
               const std::optional<std::string>& out_override) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = load_config(config_path);
  if (out_override) cfg.output_dir = *out_override;

  const auto schedule = NoiseSchedule::linear(cfg.T, cfg.beta_start,
                                              cfg.beta_end, cfg.vp);
  const auto world = load_world(cfg);
  const auto stack = make_stack(cfg.denoiser, cfg.restorer, cfg.fuser, world,
                                schedule, cfg.sampler.tau);
  const auto data = draw_dataset(world, 1, cfg.sampler.seed);
  const auto trace = sample(stack, world, data[0].y, cfg.sampler, schedule);
  const auto report = evaluate(data[0].x0, trace.x0_final);

  fs::create_directories(cfg.output_dir);
  {
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_text_file(fs::path(cfg.output_dir) / "trace.csv", csv.str());
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  std::ostringstream summary;
  summary << "{\n"
          << "  \"config_hash\": \"" << hex_string(fnv1a_hash(cfg.canonical))
          << "\",\n"
          << "  \"seed\": " << cfg.sampler.seed << ",\n"
          << "  \"mode\": \"" << mode_name(cfg.sampler.mode) << "\",\n"
          << "  \"tau\": " << cfg.sampler.tau << ",\n"
          << "  \"nfe_total\": " << trace.nfe_total << ",\n"
          << "  \"nfe_denoiser\": " << trace.nfe_denoiser << ",\n"
          << "  \"nfe_restorer\": " << trace.nfe_restorer << ",\n"
          << "  \"nfe_fuser\": " << trace.nfe_fuser << ",\n"
          << "  \"mse\": " << format_double(report.mse) << ",\n"
          << "  \"psnr_db\": "
          << (std::isinf(report.psnr_db) ? std::string("\"inf\"")
                                         : format_double(report.psnr_db))
          << ",\n"
          << "  \"runtime_ms\": " << ms << "\n"
          << "}\n";
  write_text_file(fs::path(cfg.output_dir) / "summary.json", summary.str());
  std::cout << "wrote " << (fs::path(cfg.output_dir) / "trace.csv").string()
            << " and summary.json (nfe_total " << trace.nfe_total << ", mse "
            << format_double(report.mse) << ")\n";
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& taus_arg,
              const std::optional<std::string>& out_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (out_override) cfg.output_dir = *out_override;
  std::vector<int> taus;
  std::stringstream ss(taus_arg);
  std::string item;
  while (std::getline(ss, item, ',')) taus.push_back(std::stoi(item));
  if (taus.empty()) throw ConfigError("sweep-tau: empty tau list");

  const auto schedule = NoiseSchedule::linear(cfg.T, cfg.beta_start,
                                              cfg.beta_end, cfg.vp);
  const auto world = load_world(cfg);
  const auto stack = make_stack(cfg.denoiser, cfg.restorer, cfg.fuser, world,
                                schedule, cfg.sampler.tau);
  const auto data =
      draw_dataset(world, cfg.sampler.num_samples, cfg.sampler.seed);
  const auto rows = sweep_tau(stack, world, data, taus, cfg.sampler, schedule);

  std::ostringstream csv;
  csv << "tau,mse,nfe\n";
  for (const auto& r : rows)
    csv << r.tau << ',' << format_double(r.mse) << ',' << r.nfe << '\n';
  fs::create_directories(cfg.output_dir);
  write_text_file(fs::path(cfg.output_dir) / "sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int run_compare_starts(const std::string& config_path,
                       const std::optional<std::string>& out_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (out_override) cfg.output_dir = *out_override;
  const auto schedule = NoiseSchedule::linear(cfg.T, cfg.beta_start,
                                              cfg.beta_end, cfg.vp);
  const auto world = load_world(cfg);
  const auto stack = make_stack(cfg.denoiser, cfg.restorer, cfg.fuser, world,
                                schedule, cfg.sampler.tau);
  const auto data =
      draw_dataset(world, cfg.sampler.num_samples, cfg.sampler.seed);
  const auto rows = compare_starts(stack, world, data, cfg.sampler, schedule);

  std::ostringstream csv;
  csv << "pair,mse_proposed,mse_baseline\n";
  double sum_p = 0.0, sum_b = 0.0;
  for (const auto& r : rows) {
    csv << r.pair_index << ',' << format_double(r.mse_proposed) << ','
        << format_double(r.mse_baseline) << '\n';
    sum_p += r.mse_proposed;
    sum_b += r.mse_baseline;
  }
  fs::create_directories(cfg.output_dir);
  write_text_file(fs::path(cfg.output_dir) / "compare_starts.csv", csv.str());
  std::cout << csv.str();
  std::cout << "mean proposed " << format_double(sum_p / rows.size())
            << "  mean baseline " << format_double(sum_b / rows.size()) << '\n';
  return 0;
}

int run_verify(const std::string& which, int T, std::uint64_t seed, int pairs,
               int worlds, long draws, long runs, int tau,
               const std::optional<std::string>& dump_coeffs) {
  VerifyReport report;
  if (which == "lemma2")
    report = verify_merged_kernel(T, seed, pairs);
  else if (which == "lemma1")
    report = verify_score_identity(worlds, seed);
  else if (which == "prop1")
    report = verify_restorer_dominance(std::min(worlds, 20), seed, draws);
  else if (which == "trace")
    report = verify_trace_identity(6, 10, draws * 10, seed);
  else if (which == "ddim")
    report = verify_ddim_equivalence(seed, runs, tau);
  else
    throw ConfigError("unknown verification suite '" + which +
                      "' (expected lemma1|lemma2|prop1|trace|ddim)");
  print_report(std::cout, report);
  if (!report.passed()) return 1;

  if (dump_coeffs && which == "lemma2") {
    // Written only after the checks passed; never a partial artifact.
    const auto s = NoiseSchedule::linear(T, 1e-4, 2e-2);
    std::vector<std::pair<int, int>> tk = {{T, T - 5}, {T, 3 * T / 4}};
    for (int t = 1; t <= T; t += std::max(1, T / 32))
      tk.emplace_back(t, std::max(1, t / 2));
    std::ostringstream csv;
    write_merged_coeffs_csv(csv, s, tk);
    write_text_file(*dump_coeffs, csv.str());
  }
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"conditional diffusion sampling engine on a linear-Gaussian testbed"};
  app.require_subcommand(1);

  // schedule
  auto* sched = app.add_subcommand("schedule", "dump the noise schedule as CSV");
  int sched_T = 1000;
  double sched_b0 = 1e-4, sched_b1 = 2e-2;
  std::string sched_param = "beta";
  std::string sched_out;
  sched->add_option("--T", sched_T, "number of steps");
  sched->add_option("--beta-start", sched_b0, "beta_1");
  sched->add_option("--beta-end", sched_b1, "beta_T");
  sched->add_option("--param", sched_param, "beta | tilde_beta");
  sched->add_option("--out", sched_out, "output file (default stdout)");

  // verify
  auto* ver = app.add_subcommand("verify", "run a verification suite");
  std::string ver_which;
  int ver_T = 1000, ver_pairs = 200, ver_worlds = 100, ver_tau = 25;
  std::uint64_t ver_seed = 7;
  long ver_draws = 100000, ver_runs = 100000;
  std::string ver_dump;
  ver->add_option("which", ver_which, "lemma1|lemma2|prop1|trace|ddim")
      ->required();
  ver->add_option("--T", ver_T, "schedule length");
  ver->add_option("--seed", ver_seed, "base seed");
  ver->add_option("--pairs", ver_pairs, "number of (t, k) pairs");
  ver->add_option("--worlds", ver_worlds, "number of random worlds");
  ver->add_option("--draws", ver_draws, "Monte Carlo draws");
  ver->add_option("--runs", ver_runs, "sampler runs");
  ver->add_option("--tau", ver_tau, "activation step for sampler suites");
  ver->add_option("--dump-coeffs", ver_dump,
                  "write merged-coefficient CSV after a lemma2 pass");

  // sample / sweep-tau / compare-starts
  auto* smp = app.add_subcommand("sample", "one sampling run: trace + summary");
  std::string smp_config, smp_out;
  smp->add_option("--config,-c", smp_config, "config JSON")->required();
  smp->add_option("--output-dir,-o", smp_out, "override output directory");

  auto* swp = app.add_subcommand("sweep-tau", "tau sweep: mse and NFE per tau");
  std::string swp_config, swp_taus, swp_out;
  swp->add_option("--config,-c", swp_config, "config JSON")->required();
  swp->add_option("--taus", swp_taus, "comma-separated tau list")->required();
  swp->add_option("--output-dir,-o", swp_out, "override output directory");

  auto* cmp = app.add_subcommand(
      "compare-starts", "paired merged-jump vs diffused-start comparison");
  std::string cmp_config, cmp_out;
  cmp->add_option("--config,-c", cmp_config, "config JSON")->required();
  cmp->add_option("--output-dir,-o", cmp_out, "override output directory");

  // cost
  auto* cost = app.add_subcommand("cost", "sampling cost arithmetic");
  double cost_x = -1.0, cost_y = 0.0;
  long cost_nfe = -1;
  bool cost_table = false;
  std::string cost_out;
  cost->add_option("--per-nfe", cost_x, "TFLOP per sampling step");
  cost->add_option("--fixed", cost_y, "TFLOP of run-once modules");
  cost->add_option("--nfe", cost_nfe, "number of function evaluations");
  cost->add_flag("--table", cost_table, "emit the reference table as JSON");
  cost->add_option("--out", cost_out, "write table JSON to file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sched->parsed()) {
      const auto s = NoiseSchedule::linear(sched_T, sched_b0, sched_b1,
                                           parse_variance_param(sched_param));
      if (sched_out.empty()) {
        s.write_csv(std::cout);
      } else {
        std::ostringstream csv;
        s.write_csv(csv);
        write_text_file(sched_out, csv.str());
      }
      return 0;
    }
    if (ver->parsed())
      return run_verify(ver_which, ver_T, ver_seed, ver_pairs, ver_worlds,
                        ver_draws, ver_runs, ver_tau,
                        ver_dump.empty() ? std::nullopt
                                         : std::optional(ver_dump));
    if (smp->parsed())
      return run_sample(smp_config, smp_out.empty() ? std::nullopt
                                                    : std::optional(smp_out));
    if (swp->parsed())
      return run_sweep(swp_config, swp_taus,
                       swp_out.empty() ? std::nullopt : std::optional(swp_out));
    if (cmp->parsed())
      return run_compare_starts(
          cmp_config, cmp_out.empty() ? std::nullopt : std::optional(cmp_out));
    if (cost->parsed()) {
      if (cost_table || (cost_x < 0.0 && cost_nfe < 0)) {
        json rows = json::array();
        for (const auto& r : reference_cost_table()) {
          rows.push_back({{"method", r.method},
                          {"per_nfe_tflop", r.model.per_nfe_tflop},
                          {"fixed_tflop", r.model.fixed_tflop},
                          {"nfe", r.nfe},
                          {"total_tflop", total_cost(r.model, r.nfe)}});
        }
        const std::string text = rows.dump(2) + "\n";
        std::cout << text;
        if (!cost_out.empty()) write_text_file(cost_out, text);
        return 0;
      }
      if (cost_x < 0.0 || cost_nfe < 0)
        throw ConfigError("cost: need --per-nfe and --nfe (or --table)");
      std::cout << json(total_cost({cost_x, cost_y}, cost_nfe)).dump() << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace dpir::cli
