// mcm: generate instances, run solvers and grids, build performance profiles.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "mcm/bench.hpp"

namespace fs = std::filesystem;
using namespace mcm;
using namespace mcm::bench;

namespace {

constexpr int kUsageError = 64;

fs::path output_dir(const std::string& flag) {
  if (const char* env = std::getenv("MCM_OUT"); env != nullptr && *env != '\0') return env;
  return flag.empty() ? fs::path(".") : fs::path(flag);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"Multipliers correction methods on the Stiefel manifold"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_flag;
  std::uint64_t seed = 2024;
  std::string solver_name = "gpp";
  std::string gamma_mode = "practical";
  std::string corrections;
  long max_iter = 0;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  bool allow_large = false;
  bool quick = false;
  bool verbose = false;
  std::string instance_path;
  std::string results_path;
  double omega_max = 100.0;
  int grid_points = 50;
  std::string inject_fault;

  app.add_flag("-v,--verbose", verbose, "Log solver diagnostics");

  auto* gen = app.add_subcommand("gen", "Write instance metadata files for a spec");
  gen->add_option("--spec", spec_path, "Experiment spec (JSON)")->required();
  gen->add_option("--out", out_flag, "Output directory (MCM_OUT overrides)");
  gen->add_flag("--allow-large", allow_large, "Allow n above the desk-scale cap");

  auto* solve_cmd = app.add_subcommand("solve", "Solve one instance");
  solve_cmd->add_option("--instance", instance_path, "Instance metadata file")->required();
  solve_cmd->add_option("--solver", solver_name, "grp | gpp | cbcdp | qrbase");
  solve_cmd->add_option("--gamma-mode", gamma_mode, "practical | theory");
  solve_cmd->add_option("--corrections", corrections, "delta | fixed:N");
  solve_cmd->add_option("--max-iter", max_iter, "Iteration cap");
  solve_cmd->add_option("--seed", seed, "Master seed for the starting point");
  solve_cmd->add_option("--out", out_flag, "Output directory (MCM_OUT overrides)");
  solve_cmd->add_flag("--allow-large", allow_large, "Allow n above the desk-scale cap");

  auto* bench_cmd = app.add_subcommand("bench", "Run a solver grid and write results.csv");
  bench_cmd->add_option("--spec", spec_path, "Experiment spec (JSON)")->required();
  bench_cmd->add_option("--out", out_flag, "Output directory (MCM_OUT overrides)");
  bench_cmd->add_option("--seed", seed, "Master seed (overrides the spec)");
  bench_cmd->add_option("--gamma-mode", gamma_mode, "practical | theory (overrides the spec)");
  bench_cmd->add_option("--corrections", corrections, "delta | fixed:N (overrides the spec)");
  bench_cmd->add_option("--max-iter", max_iter, "Iteration cap (overrides the spec)");
  bench_cmd->add_option("--workers", workers, "Concurrent runs");
  bench_cmd->add_flag("--allow-large", allow_large, "Allow n above the desk-scale cap");

  auto* profile_cmd = app.add_subcommand("profile", "Performance profile from results.csv");
  profile_cmd->add_option("--results", results_path, "results.csv from bench")->required();
  profile_cmd->add_option("--omega-max", omega_max, "Largest ratio on the grid");
  profile_cmd->add_option("--grid-points", grid_points, "Number of log-spaced grid points");
  profile_cmd->add_option("--out", out_flag, "Output directory (MCM_OUT overrides)");

  auto* verify_cmd = app.add_subcommand("verify", "Run the invariant and oracle battery");
  verify_cmd->add_flag("--quick", quick, "Small instances only");
  verify_cmd->add_option("--seed", seed, "Seed for random test points");
  verify_cmd->add_option("--inject-fault", inject_fault, "Deliberately break a component (gradient)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  RunOptions opts;
  try {
    if (gamma_mode == "practical") {
      opts.gamma_mode = GammaMode::Practical;
    } else if (gamma_mode == "theory") {
      opts.gamma_mode = GammaMode::Theory;
    } else {
      throw InvalidSpec("--gamma-mode must be practical or theory");
    }
    if (!corrections.empty()) opts.corrections = parse_corrections(corrections);
    if (max_iter < 0) throw InvalidSpec("--max-iter must be >= 1");
    if (max_iter > 0) opts.max_iter = max_iter;
    if (!inject_fault.empty() && inject_fault != "gradient")
      throw InvalidSpec("--inject-fault supports only 'gradient'");
  } catch (const InvalidSpec& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (gen->parsed()) {
      const ExperimentSpec spec = load_spec(spec_path, allow_large);
      for (const fs::path& p : cmd_gen(spec, output_dir(out_flag))) std::cout << p.string() << '\n';
      return 0;
    }

    if (solve_cmd->parsed()) {
      SolverName solver;
      try {
        solver = solver_from_string(solver_name);
      } catch (const InvalidSpec& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsageError;
      }
      InstanceMeta inst = load_instance(instance_path);
      inst.params.allow_large = allow_large;
      const SolveOutput res = cmd_solve(inst, solver, opts, seed, output_dir(out_flag));
      const SolveReport& r = res.report;
      std::cout << inst.file_stem() << ' ' << to_string(solver) << ' ' << to_string(r.status)
                << " iters=" << r.iters << " f=" << format_double(r.final_f()) << '\n'
                << res.summary_path.string() << '\n'
                << res.trace_path.string() << '\n';
      if (!r.message.empty()) std::cerr << r.message << '\n';
      return exit_code(r.status);
    }

    if (bench_cmd->parsed()) {
      ExperimentSpec spec = load_spec(spec_path, allow_large);
      if (bench_cmd->count("--seed") > 0) {
        spec.master_seed = seed;
      }
      if (bench_cmd->count("--gamma-mode") > 0) spec.options.gamma_mode = opts.gamma_mode;
      if (opts.corrections) spec.options.corrections = opts.corrections;
      if (opts.max_iter) spec.options.max_iter = opts.max_iter;
      const std::vector<ResultRow> rows = run_bench(spec, workers);
      const fs::path dir = output_dir(out_flag);
      fs::create_directories(dir);
      {
        auto os = open_out(dir / "results.csv");
        write_results_csv(os, rows);
      }
      {
        auto os = open_out(dir / "summary.csv");
        write_summary_csv(os, rows);
      }
      std::cout << (dir / "results.csv").string() << '\n' << (dir / "summary.csv").string() << '\n';
      return 0;
    }

    if (profile_cmd->parsed()) {
      std::ifstream is(results_path, std::ios::binary);
      if (!is) throw Error("cannot read " + results_path);
      const ProfileTable table = compute_profile(read_results_csv(is), omega_max, grid_points);
      const fs::path dir = output_dir(out_flag);
      fs::create_directories(dir);
      auto os = open_out(dir / "profile.csv");
      write_profile_csv(os, table);
      std::cout << (dir / "profile.csv").string() << '\n';
      return 0;
    }

    if (verify_cmd->parsed()) {
      VerifyOptions vo;
      vo.quick = quick;
      vo.seed = seed;
      vo.inject_gradient_fault = inject_fault == "gradient";
      bool ok = true;
      for (const CheckOutcome& c : cmd_verify(vo)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const SingleSolver& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvalidSpec& e) {
    std::cerr << "invalid spec: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}
