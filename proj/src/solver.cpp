#include "mcm/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include <spdlog/spdlog.h>

namespace mcm {
namespace {

using Clock = std::chrono::steady_clock;

// Produces Xbar from (X, G) at iteration k, reporting the stepsize it used.
using StepFn = std::function<std::pair<StiefelPoint, double>(const StiefelPoint&, const Mat&, long)>;

SolveReport run(const ObjectiveModel& model, const StiefelPoint& x0, const SolveConfig& cfg,
                const StepFn& step) {
  const auto start = Clock::now();
  const Index n = x0.n();
  if (model.rows() != n || model.cols() != x0.p())
    throw DimensionMismatch("solve: starting point does not match the model");

  SolveReport report(x0);
  report.gamma = cfg.correction.gamma;
  report.rho = model.rho_bound();

  Mat g = model.gradient(x0.value());
  double f = model.value(x0.value());
  report.f0 = f;
  report.substat0 = substationarity(x0, g);
  report.sym0 = symmetry_violation(x0, g);
  report.kkt0 = residual_c(x0, g).norm();
  report.feas0 = feasibility_violation(x0.value());
  report.grad_norm2_0 = spectral_norm(g);

  LemmaConstants consts{report.rho, cfg.correction.gamma,
                        std::max(model.gradient_norm_bound().value_or(0.0), report.grad_norm2_0)};

  StiefelPoint x = x0;
  std::vector<IterRecord>& trace = report.trace;
  for (long k = 1;; ++k) {
    IterRecord rec;
    rec.k = k;
    std::optional<std::pair<StiefelPoint, double>> reduced;
    try {
      reduced = step(x, g, k);
    } catch (const Error& e) {
      report.status = Status::StepFailed;
      report.message = e.what();
      spdlog::warn("solve: step failed at k = {}: {}", k, e.what());
      break;
    }
    rec.tau = reduced->second;

    StiefelPoint x_new = std::move(reduced->first);
    Mat g_new;
    double f_new = 0.0;
    if (cfg.correct) {
      SweepResult sweep = correction_sweep(x_new, model, cfg.correction, k);
      rec.f_bar = sweep.infos.empty() ? sweep.f : sweep.infos.front().f_before;
      rec.correction_log = std::move(sweep.infos);
      rec.corrections = std::count_if(rec.correction_log.begin(), rec.correction_log.end(),
                                      [](const CorrectionInfo& i) { return i.applied; });
      x_new = std::move(sweep.x);
      g_new = std::move(sweep.gradient);
      f_new = sweep.f;
    } else {
      g_new = model.gradient(x_new.value());
      f_new = model.value(x_new.value());
      rec.f_bar = f_new;
    }

    rec.f = f_new;
    rec.substat = substationarity(x_new, g_new);
    rec.sym = symmetry_violation(x_new, g_new);
    rec.kkt = residual_c(x_new, g_new).norm();
    rec.feas = feasibility_violation(x_new.value());
    rec.grad_norm2 = spectral_norm(g_new);
    rec.tol_x = (x_new.value() - x.value()).norm() / std::sqrt(static_cast<double>(n));
    rec.tol_f = std::abs(f_new - f) / (std::abs(f) + 1.0);
    rec.wall_s = std::chrono::duration<double>(Clock::now() - start).count();

    if (cfg.lemma_check) {
      for (const CorrectionInfo& info : rec.correction_log) {
        consts.grad_bound = std::max(consts.grad_bound, info.grad_norm2);
        check_correction(info, k, consts, report.lemma_violations);
      }
      consts.grad_bound = std::max(consts.grad_bound, rec.grad_norm2);
      check_monotone(k, f, f_new, report.lemma_violations);
    }

    x = std::move(x_new);
    g = std::move(g_new);
    f = f_new;
    trace.push_back(std::move(rec));
    report.iters = k;

    const Status status = check_stop(trace, report.kkt0, cfg);
    if (status != Status::Continue) {
      report.status = status;
      break;
    }
  }
  report.final_x = x;
  if (!cfg.record_trace) trace.clear();
  return report;
}

double mean_tail(std::span<const IterRecord> tail, double IterRecord::*field) {
  double s = 0.0;
  for (const IterRecord& r : tail) s += r.*field;
  return s / static_cast<double>(tail.size());
}

void prepare(SolveConfig& cfg, const ObjectiveModel& model) {
  cfg.validate();
  if (cfg.lemma_check && cfg.correct && !(cfg.correction.gamma > model.rho_bound())) {
    const double raised = 2.0 * model.rho_bound();
    spdlog::warn("solve: lemma checks need gamma > rho = {:.6g}; raising gamma from {:.6g} to {:.6g}",
                 model.rho_bound(), cfg.correction.gamma, raised);
    cfg.correction.gamma = raised;
  }
}

}  // namespace

std::string to_string(Status status) {
  switch (status) {
    case Status::Continue:
      return "Continue";
    case Status::ConvergedKKT:
      return "ConvergedKKT";
    case Status::ConvergedRelXF:
      return "ConvergedRelXF";
    case Status::ConvergedWindow:
      return "ConvergedWindow";
    case Status::MaxIter:
      return "MaxIter";
    case Status::StepFailed:
      return "StepFailed";
  }
  return "Unknown";
}

bool is_converged(Status status) {
  return status == Status::ConvergedKKT || status == Status::ConvergedRelXF ||
         status == Status::ConvergedWindow;
}

void SolveConfig::validate() const {
  if (!(eps_g > 0.0) || !(eps_x > 0.0) || !(eps_f > 0.0))
    throw Error("SolveConfig: tolerances must be positive");
  if (window < 1) throw Error("SolveConfig: window length must be >= 1");
  if (max_iter < 1) throw Error("SolveConfig: max_iter must be >= 1");
  if (kkt_abs_tol < 0.0) throw Error("SolveConfig: kkt_abs_tol must be >= 0");
  step.validate();
  if (correct) correction.validate();
}

Status check_stop(std::span<const IterRecord> trace, double kkt0, const SolveConfig& cfg) {
  if (trace.empty()) throw Error("check_stop: empty trace");
  const IterRecord& last = trace.back();
  if (last.kkt <= std::max(cfg.eps_g * kkt0, cfg.kkt_abs_tol)) return Status::ConvergedKKT;
  if (last.tol_x <= cfg.eps_x && last.tol_f <= cfg.eps_f) return Status::ConvergedRelXF;
  const auto w = static_cast<std::size_t>(std::min<long>(last.k, cfg.window));
  const auto tail = trace.last(std::min(w, trace.size()));
  if (mean_tail(tail, &IterRecord::tol_x) <= 10.0 * cfg.eps_x &&
      mean_tail(tail, &IterRecord::tol_f) <= 10.0 * cfg.eps_f)
    return Status::ConvergedWindow;
  if (last.k >= cfg.max_iter) return Status::MaxIter;
  return Status::Continue;
}

SolveReport solve(const ObjectiveModel& model, const StiefelPoint& x0, SolveConfig cfg) {
  prepare(cfg, model);
  const double scale = model.scale();
  BBState bb;
  StepFn step = [&](const StiefelPoint& x, const Mat& g, long k) {
    double tau = 0.0;
    if (cfg.step.kind != StepKind::CBCD) {
      tau = cfg.step.tau_policy.kind == TauPolicy::Kind::Fixed
                ? cfg.step.tau_policy.value
                : bb_tau(bb, x.value(), residual_c(x, g), k, cfg.step, scale);
    }
    ReductionResult r = reduction_step(x, g, model, cfg.step, tau);
    return std::make_pair(std::move(r.x_bar), r.tau_used);
  };
  return run(model, x0, cfg, step);
}

SolveReport solve_qr_baseline(const ObjectiveModel& model, const StiefelPoint& x0,
                              SolveConfig cfg) {
  cfg.correct = false;
  prepare(cfg, model);
  const double scale = model.scale();
  BBState bb;
  StepFn step = [&](const StiefelPoint& x, const Mat& g, long k) {
    const Mat& xv = x.value();
    const Mat s = xv.transpose() * g;
    const Mat xi = g - xv * (0.5 * (s + s.transpose()));
    const double tau = cfg.step.tau_policy.kind == TauPolicy::Kind::Fixed
                           ? cfg.step.tau_policy.value
                           : bb_tau(bb, xv, xi, k, cfg.step, scale);
    return std::make_pair(orthonormalize_qr(xv - tau * xi), tau);
  };
  return run(model, x0, cfg, step);
}

void apply_family_tolerances(SolveConfig& cfg, Family family) {
  cfg.eps_x = 1e-6;
  cfg.window = 5;
  cfg.max_iter = 3000;
  if (family == Family::Quadratic) {
    cfg.eps_g = 1e-5;
    cfg.eps_f = 1e-10;
  } else {
    cfg.eps_g = 1e-3;
    cfg.eps_f = 1e-8;
  }
}

SolveConfig practical_config(StepKind kind, const ObjectiveModel& model, Family family) {
  SolveConfig cfg;
  apply_family_tolerances(cfg, family);
  cfg.step.kind = kind;
  cfg.step.tau_policy = TauPolicy::abb();
  cfg.correction.gamma = 1e-3 * model.scale();
  cfg.correction.schedule = CorrectionSchedule::fixed(1);
  return cfg;
}

SolveConfig theory_config(StepKind kind, const ObjectiveModel& model, Family family) {
  SolveConfig cfg;
  apply_family_tolerances(cfg, family);
  const double rho = model.rho_bound();
  cfg.step.kind = kind;
  cfg.step.tau_policy = TauPolicy::fixed(1.0 / (2.0 * rho));
  cfg.correction.gamma = 2.0 * rho;
  cfg.correction.schedule = CorrectionSchedule::fixed(1);
  cfg.lemma_check = true;
  return cfg;
}

void write_trace_csv(std::ostream& os, const SolveReport& report) {
  char buf[512];
  os << kTraceHeader << '\n';
  std::snprintf(buf, sizeof buf, "0,%.17g,%.17g,%.17g,%.17g,%.17g,0,0,0,0,0\n", report.f0,
                report.substat0, report.sym0, report.kkt0, report.feas0);
  os << buf;
  for (const IterRecord& r : report.trace) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld,%.17g,%.17g,%.17g\n",
                  r.k, r.f, r.substat, r.sym, r.kkt, r.feas, r.tau, r.corrections, r.tol_x,
                  r.tol_f, r.wall_s);
    os << buf;
  }
}

}  // namespace mcm
