#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mcm/rng.hpp"
#include "mcm/solver.hpp"
#include "mcm/verification.hpp"

using namespace mcm;

namespace {

IterRecord rec(long k, double kkt, double tol_x, double tol_f) {
  IterRecord r;
  r.k = k;
  r.kkt = kkt;
  r.tol_x = tol_x;
  r.tol_f = tol_f;
  return r;
}

int non_monotone_steps(const SolveReport& r) {
  int bad = 0;
  double prev = r.f0;
  for (const IterRecord& t : r.trace) {
    if (t.f > prev + 1e-12 * (1.0 + std::abs(prev))) ++bad;
    prev = t.f;
  }
  return bad;
}

}  // namespace

TEST_CASE("stopping rules") {
  SolveConfig cfg;
  cfg.eps_g = 1e-5;
  cfg.eps_x = 1e-6;
  cfg.eps_f = 1e-10;
  cfg.window = 5;
  cfg.max_iter = 100;

  std::vector<IterRecord> t{rec(1, 1.0, 0.0, 0.0)};
  CHECK(check_stop(t, 10.0, cfg) == Status::ConvergedRelXF);

  t = {rec(1, 9e-5, 1.0, 1.0)};
  CHECK(check_stop(t, 10.0, cfg) == Status::ConvergedKKT);
  t = {rec(1, 1.1e-4, 1.0, 1.0)};
  CHECK(check_stop(t, 10.0, cfg) == Status::Continue);
  // at the threshold the <= comparison fires
  t = {rec(1, 1e-5 * 10.0, 1.0, 1.0)};
  CHECK(check_stop(t, 10.0, cfg) == Status::ConvergedKKT);

  // only one of tol_x, tol_f small: rule 2 needs both
  t = {rec(1, 1.0, 0.0, 1.0)};
  CHECK(check_stop(t, 10.0, cfg) == Status::Continue);

  // window means exactly at 10 eps (binary fractions keep the means exact)
  SolveConfig wcfg = cfg;
  wcfg.eps_x = std::ldexp(1.0, -20);
  wcfg.eps_f = std::ldexp(1.0, -30);
  t.clear();
  for (long k = 1; k <= 5; ++k) t.push_back(rec(k, 1.0, 10 * wcfg.eps_x, 10 * wcfg.eps_f));
  CHECK(check_stop(t, 10.0, wcfg) == Status::ConvergedWindow);
  t.back().tol_x = std::nextafter(10 * wcfg.eps_x, 1.0) + 1e-12;
  CHECK(check_stop(t, 10.0, wcfg) == Status::Continue);

  // the window shrinks to k records early on
  t = {rec(1, 1.0, 5e-6, 5e-10)};
  CHECK(check_stop(t, 10.0, cfg) == Status::ConvergedWindow);

  cfg.max_iter = 1;
  t = {rec(1, 1.0, 1.0, 1.0)};
  CHECK(check_stop(t, 10.0, cfg) == Status::MaxIter);
  // priority: rule 1 beats max_iter
  t = {rec(1, 1e-6, 1.0, 1.0)};
  CHECK(check_stop(t, 10.0, cfg) == Status::ConvergedKKT);
}

TEST_CASE("config validation") {
  SolveConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SolveConfig{};
  cfg.window = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SolveConfig{};
  cfg.eps_f = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  const QuadraticProblem prob = gen_problem1(default_params(Family::Quadratic, 10, 2, 1));
  SolveConfig zero = practical_config(StepKind::GP, prob, Family::Quadratic);
  zero.max_iter = 0;
  CHECK_THROWS_AS(solve(prob, initial_point(10, 2, 1, 1), zero), Error);
}

TEST_CASE("start at the global minimizer") {
  GenParams gp = default_params(Family::Quadratic, 30, 4, 6);
  const QuadraticProblem base = gen_problem1(gp);
  const QuadraticProblem prob(base.m(), Mat::Zero(30, 4));
  Eigen::SelfAdjointEigenSolver<Mat> es(prob.m());
  const StiefelPoint x0(es.eigenvectors().leftCols(4));
  const double f0 = prob.value(x0.value());

  for (StepKind kind : {StepKind::GR, StepKind::GP, StepKind::CBCD}) {
    const SolveReport r = solve(prob, x0, practical_config(kind, prob, Family::Quadratic));
    CHECK(r.status == Status::ConvergedKKT);
    CHECK(r.iters <= 2);
    CHECK(std::abs(r.final_f() - f0) <= 1e-12 * (1.0 + std::abs(f0)));
  }
  const SolveReport q = solve_qr_baseline(prob, x0, practical_config(StepKind::GP, prob, Family::Quadratic));
  CHECK(q.status == Status::ConvergedKKT);
  CHECK(q.iters <= 2);
  CHECK(std::abs(q.final_f() - f0) <= 1e-12 * (1.0 + std::abs(f0)));
}

TEST_CASE("qr baseline fixed point") {
  // G = X S with S symmetric: the Riemannian gradient vanishes
  Rng rng(3);
  const StiefelPoint x = orthonormalize_qr(rng.gaussian_matrix(9, 3));
  const Mat s = rng.gaussian_matrix(3, 3);
  const Mat sym = (s + s.transpose()).eval();
  const Mat m = (x.value() * sym * x.value().transpose()).eval();
  const QuadraticProblem prob(m, Mat::Zero(9, 3));
  CHECK(residual_c(x, prob.gradient(x.value())).norm() <= 1e-13);
  const SolveReport r = solve_qr_baseline(prob, x, practical_config(StepKind::GP, prob, Family::Quadratic));
  CHECK(is_converged(r.status));
  CHECK((r.final_x.value() - x.value()).norm() <= 1e-12);
}

TEST_CASE("iteration cap and trace contract") {
  const QuadraticProblem prob = gen_problem1(default_params(Family::Quadratic, 40, 4, 2));
  SolveConfig cfg = practical_config(StepKind::GP, prob, Family::Quadratic);
  cfg.max_iter = 1;
  const SolveReport r = solve(prob, initial_point(40, 4, 2, 9), cfg);
  CHECK(r.status == Status::MaxIter);
  CHECK(r.iters == 1);
  CHECK(r.trace.size() == 1);

  cfg.max_iter = 50;
  cfg.record_trace = false;
  const SolveReport quiet = solve(prob, initial_point(40, 4, 2, 9), cfg);
  CHECK(quiet.trace.size() <= 1);

  cfg.record_trace = true;
  const SolveReport full = solve(prob, initial_point(40, 4, 2, 9), cfg);
  CHECK(static_cast<long>(full.trace.size()) == full.iters);
  for (const IterRecord& t : full.trace) {
    CHECK(std::abs(t.kkt * t.kkt - t.substat * t.substat - t.sym * t.sym) <= 1e-8 * t.kkt * t.kkt);
    CHECK(t.feas <= 1e-12);
  }

  std::ostringstream os;
  write_trace_csv(os, full);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == kTraceHeader);
  long rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == full.iters + 1);
}

TEST_CASE("GPP on a quadratic instance") {
  const QuadraticProblem prob = gen_problem1(default_params(Family::Quadratic, 200, 10, 42));
  const SolveConfig cfg = practical_config(StepKind::GP, prob, Family::Quadratic);
  CHECK(cfg.correction.gamma == doctest::Approx(1e-3 * prob.scale()));
  CHECK(cfg.eps_g == 1e-5);
  const SolveReport r = solve(prob, initial_point(200, 10, 42, 2024), cfg);
  CHECK(is_converged(r.status));
  CHECK(r.iters <= 3000);
  CHECK(non_monotone_steps(r) == 0);

  // the window rule can fire first under default tolerances; with only the
  // kkt rule active the relative kkt target is reached inside the budget
  SolveConfig kkt_only = cfg;
  kkt_only.eps_x = 1e-300;
  kkt_only.eps_f = 1e-300;
  const SolveReport k = solve(prob, initial_point(200, 10, 42, 2024), kkt_only);
  CHECK(k.status == Status::ConvergedKKT);
  CHECK(k.iters <= 3000);
  CHECK(k.trace.back().kkt <= 1e-5 * k.kkt0);
  CHECK(non_monotone_steps(k) == 0);
}

TEST_CASE("theory mode") {
  const BrockettProblem prob = gen_problem2(default_params(Family::Brockett, 30, 3, 8));
  const SolveConfig cfg = theory_config(StepKind::GP, prob, Family::Brockett);
  CHECK(cfg.correction.gamma == doctest::Approx(2.0 * prob.rho_bound()));
  CHECK(cfg.step.tau_policy.kind == TauPolicy::Kind::Fixed);
  CHECK(cfg.step.tau_policy.value == doctest::Approx(0.5 / prob.rho_bound()));
  CHECK(cfg.lemma_check);
  SolveConfig short_run = cfg;
  short_run.max_iter = 300;
  const SolveReport r = solve(prob, initial_point(30, 3, 8, 2024), short_run);
  CHECK(r.lemma_violations.empty());
  CHECK(non_monotone_steps(r) == 0);

  // lemma checks with gamma <= rho raise gamma to 2 rho
  SolveConfig low = short_run;
  low.correction.gamma = 0.5 * prob.rho_bound();
  const SolveReport raised = solve(prob, initial_point(30, 3, 8, 2024), low);
  CHECK(raised.gamma == doctest::Approx(2.0 * prob.rho_bound()));
}

TEST_CASE("status strings and family tolerances") {
  CHECK(to_string(Status::ConvergedKKT) == "ConvergedKKT");
  CHECK(to_string(Status::MaxIter) == "MaxIter");
  CHECK(is_converged(Status::ConvergedWindow));
  CHECK_FALSE(is_converged(Status::StepFailed));
  SolveConfig cfg;
  apply_family_tolerances(cfg, Family::Brockett);
  CHECK(cfg.eps_g == 1e-3);
  CHECK(cfg.eps_f == 1e-8);
  apply_family_tolerances(cfg, Family::Quadratic);
  CHECK(cfg.eps_g == 1e-5);
  CHECK(cfg.eps_f == 1e-10);
}
