#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcm/correction.hpp"
#include "mcm/lemma_checks.hpp"
#include "mcm/problems.hpp"
#include "mcm/steps.hpp"

namespace mcm {

enum class Status { Continue, ConvergedKKT, ConvergedRelXF, ConvergedWindow, MaxIter, StepFailed };

std::string to_string(Status status);
bool is_converged(Status status);

struct SolveConfig {
  StepConfig step;
  CorrectionConfig correction;
  bool correct = true;  // false runs the bare reduction step
  double eps_g = 1e-5;
  double eps_x = 1e-6;
  double eps_f = 1e-10;
  long window = 5;
  long max_iter = 3000;
  // Rule 1 also fires once kkt is below this absolute floor, so a start at an
  // exact stationary point (kkt_0 ~ 0) is recognized.
  double kkt_abs_tol = 1e-12;
  bool lemma_check = false;
  bool record_trace = true;

  void validate() const;
};

struct IterRecord {
  long k = 0;
  double f = 0.0;
  double f_bar = 0.0;  // f after the reduction step, before corrections
  double substat = 0.0;
  double sym = 0.0;
  double kkt = 0.0;
  double feas = 0.0;
  double tau = 0.0;
  long corrections = 0;
  double tol_x = 0.0;
  double tol_f = 0.0;
  double wall_s = 0.0;
  double grad_norm2 = 0.0;
  std::vector<CorrectionInfo> correction_log;
};

struct SolveReport {
  explicit SolveReport(StiefelPoint start) : final_x(std::move(start)) {}

  StiefelPoint final_x;
  Status status = Status::Continue;
  long iters = 0;
  double f0 = 0.0;
  double kkt0 = 0.0;
  double substat0 = 0.0;
  double sym0 = 0.0;
  double feas0 = 0.0;
  double grad_norm2_0 = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  std::string message;
  std::vector<IterRecord> trace;
  std::vector<LemmaViolation> lemma_violations;

  double final_f() const { return trace.empty() ? f0 : trace.back().f; }
};

/// Evaluates the stopping rules on the last record, in priority order.
Status check_stop(std::span<const IterRecord> trace, double kkt0, const SolveConfig& cfg);

/// Reduction step followed by proximal corrections, until a stopping rule fires.
SolveReport solve(const ObjectiveModel& model, const StiefelPoint& x0, SolveConfig cfg);

/// Riemannian gradient descent with QR retraction and the same stepsize and stopping rules.
SolveReport solve_qr_baseline(const ObjectiveModel& model, const StiefelPoint& x0,
                              SolveConfig cfg);

/// Stopping tolerances used for a problem family.
void apply_family_tolerances(SolveConfig& cfg, Family family);

/// gamma = 1e-3 * scale, alternating BB stepsizes.
SolveConfig practical_config(StepKind kind, const ObjectiveModel& model, Family family);

/// gamma = 2 rho, fixed tau = 1 / (2 rho), one correction per iteration, lemma checks on.
SolveConfig theory_config(StepKind kind, const ObjectiveModel& model, Family family);

inline constexpr const char* kTraceHeader = "k,f,substat,sym,kkt,feas,tau,corrections,tol_x,tol_f,wall_s";

/// Writes the trace CSV, including a k = 0 row for the starting point.
void write_trace_csv(std::ostream& os, const SolveReport& report);

}  // namespace mcm
