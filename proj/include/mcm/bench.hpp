#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcm/problems.hpp"
#include "mcm/solver.hpp"

namespace mcm::bench {

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class SingleSolver : public Error {
 public:
  using Error::Error;
};

enum class SolverName { GRP, GPP, CBCDP, QRBase };

std::string to_string(SolverName s);
/// Accepts grp | gpp | cbcdp | qrbase; throws InvalidSpec otherwise.
SolverName solver_from_string(const std::string& name);

enum class GammaMode { Practical, Theory };

struct CorrectionChoice {
  bool delta = true;
  long fixed = 1;
};

/// Parses "delta" or "fixed:N".
CorrectionChoice parse_corrections(const std::string& text);

/// Per-run overrides layered on top of the mode defaults.
struct RunOptions {
  GammaMode gamma_mode = GammaMode::Practical;
  std::optional<CorrectionChoice> corrections;  // default: delta (practical), fixed:1 (theory)
  std::optional<long> max_iter;
  std::optional<double> eps_g;
  std::optional<double> eps_x;
  std::optional<double> eps_f;
  std::optional<long> window;
};

SolveConfig make_config(SolverName solver, const ObjectiveModel& model, Family family,
                        const RunOptions& opts);

SolveReport run_solver(SolverName solver, const ObjectiveModel& model, const StiefelPoint& x0,
                       const SolveConfig& cfg);

struct ExperimentSpec {
  std::vector<InstanceMeta> instances;  // expanded grid, deduplicated, sorted by name
  std::vector<SolverName> solvers;
  RunOptions options;
  long repetitions = 1;
  std::uint64_t master_seed = 0;
};

/// Parses and expands a JSON experiment spec. Syntax errors report line and
/// column; semantic errors name the offending field as a JSON pointer.
ExperimentSpec parse_spec(const std::string& text, bool allow_large = false);
ExperimentSpec load_spec(const std::filesystem::path& path, bool allow_large = false);

/// Writes one metadata file per instance; returns the paths written.
std::vector<std::filesystem::path> cmd_gen(const ExperimentSpec& spec,
                                           const std::filesystem::path& out_dir);

InstanceMeta load_instance(const std::filesystem::path& path);

struct SolveOutput {
  SolveReport report;
  std::filesystem::path summary_path;
  std::filesystem::path trace_path;
};

/// Solves one instance from the shared start derived from master ^ instance seed
/// and writes <stem>_<solver>.json and <stem>_<solver>_trace.csv.
SolveOutput cmd_solve(const InstanceMeta& inst, SolverName solver, const RunOptions& opts,
                      std::uint64_t master_seed, const std::filesystem::path& out_dir);

/// Process exit code for a finished solve: 0 converged, 2 MaxIter, 3 StepFailed.
int exit_code(Status status);

inline constexpr double kMachineEps = 2.220446049250313e-16;

struct ResultRow {
  std::string instance;
  Family family = Family::Quadratic;
  Index n = 0;
  Index p = 0;
  std::uint64_t seed = 0;
  std::string solver;
  std::string status;
  bool failed = false;
  long iters = 0;
  double f = 0.0;
  double f_min = 0.0;
  double fval_variance = 0.0;
  double kkt = 0.0;
  double kkt_rel = 0.0;
  double feasibility = 0.0;
  double wall_s = 0.0;
};

inline constexpr const char* kResultsHeader =
    "instance,family,n,p,seed,solver,status,failed,iters,f,f_min,fval_variance,kkt,kkt_rel,"
    "feasibility,wall_s";

/// Fills f_min and fval_variance per instance from the rows present.
void finalize_rows(std::vector<ResultRow>& rows);

/// Runs every (instance, solver) pair on a bounded worker pool; rows come back
/// sorted by instance, then solver, with f_min filled in.
std::vector<ResultRow> run_bench(const ExperimentSpec& spec, unsigned workers);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& is);

/// Per-solver means of time, function value variance, KKT violation and feasibility.
void write_summary_csv(std::ostream& os, const std::vector<ResultRow>& rows);

struct ProfileTable {
  std::vector<std::string> problems;
  std::vector<std::string> solvers;
  std::vector<std::vector<double>> ratio;  // [problem][solver]
  std::vector<double> omega;
  std::vector<std::vector<double>> pi;  // [solver][omega index]
};

inline constexpr double kFailRatio = 1e6;

/// Performance ratios t / min_s t over non-failed solvers (failures get 1e6) and
/// the fraction of problems within omega of the best, on a log grid in [1, omega_max].
ProfileTable compute_profile(const std::vector<ResultRow>& rows, double omega_max,
                             int grid_points);

void write_profile_csv(std::ostream& os, const ProfileTable& table);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  bool quick = false;
  bool inject_gradient_fault = false;
  std::uint64_t seed = 2024;
};

/// Invariant, oracle and lemma-audit battery behind `mcm verify`.
std::vector<CheckOutcome> cmd_verify(const VerifyOptions& opts);

}  // namespace mcm::bench
