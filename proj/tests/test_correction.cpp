#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mcm/correction.hpp"
#include "mcm/problems.hpp"
#include "mcm/rng.hpp"

using namespace mcm;

namespace {

Mat col(std::initializer_list<double> v) {
  Mat m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

CorrectionConfig with_gamma(double gamma) {
  CorrectionConfig c;
  c.gamma = gamma;
  return c;
}

Mat random_orthogonal(Rng& rng, Index p) {
  Eigen::HouseholderQR<Mat> qr(rng.gaussian_matrix(p, p));
  Mat q = qr.householderQ() * Mat::Identity(p, p);
  // flip a column half the time so both components of O(p) are sampled
  if (rng.uniform() < 0.5) q.col(0) *= -1.0;
  return q;
}

}  // namespace

TEST_CASE("correct_once examples") {
  const StiefelPoint e1(col({1, 0}));

  auto [flip, info] = correct_once(e1, col({2, 0}), with_gamma(1.0));
  CHECK(info.applied);
  CHECK((flip.value() - col({-1, 0})).norm() == 0.0);
  CHECK((col({2, 0}).transpose() * flip.value())(0, 0) == -2.0);
  CHECK(info.model_decrease >= 0.0);

  auto [keep, info3] = correct_once(e1, col({2, 0}), with_gamma(3.0));
  CHECK((keep.value() - e1.value()).norm() == 0.0);

  // X^T G = gamma I exactly: zero branch
  auto [same, info0] = correct_once(e1, col({1.5, 0}), with_gamma(1.5));
  CHECK_FALSE(info0.applied);
  CHECK((same.value() - e1.value()).norm() == 0.0);
}

TEST_CASE("delta schedule") {
  CHECK(delta_schedule(1) == 1);
  CHECK(delta_schedule(2) == 1);
  CHECK(delta_schedule(3) == 1);
  CHECK(delta_schedule(4) == 1);
  CHECK(delta_schedule(5) == 3);
  CHECK(delta_schedule(16) == 3);
  CHECK(delta_schedule(17) == 5);
  CHECK(delta_schedule(36) == 5);
  CHECK(delta_schedule(37) == 7);
  // against floating point evaluation away from perfect squares
  for (long k = 1; k < 5000; ++k) {
    const double r = std::sqrt(static_cast<double>(k)) / 2.0;
    if (std::abs(r - std::round(r)) > 1e-9) CHECK(delta_schedule(k) == 2 * static_cast<long>(std::ceil(r)) - 1);
  }
  CHECK(corrections_for(CorrectionSchedule::fixed(4), 100) == 4);
  CHECK(corrections_for(CorrectionSchedule::growing(), 17) == 5);
}

TEST_CASE("rotation optimality gap") {
  const StiefelPoint e1(col({1, 0}));
  CHECK(rotation_optimality_gap(e1, col({2, 0}), 1.0, Mat::Constant(1, 1, -1.0)) == 0.0);
  CHECK(rotation_optimality_gap(e1, col({2, 0}), 1.0, Mat::Constant(1, 1, 1.0)) == 2.0);
  CHECK_THROWS_AS(rotation_optimality_gap(e1, col({2, 0}), 1.0, Mat::Constant(1, 1, 1.1)),
                  NotOrthogonal);

  Rng rng(31);
  for (Index p : {2, 3, 5}) {
    const StiefelPoint x = orthonormalize_qr(rng.gaussian_matrix(3 * p, p));
    const Mat g = rng.gaussian_matrix(3 * p, p);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s)
      worst = std::min(worst, rotation_optimality_gap(x, g, 0.7, random_orthogonal(rng, p)));
    CHECK(worst >= -1e-12);
    auto [xp, info] = correct_once(x, g, with_gamma(0.7));
    const Mat q = x.value().transpose() * xp.value();
    CHECK(std::abs(rotation_optimality_gap(x, g, 0.7, q)) <= 1e-12);
  }
}

TEST_CASE("correction properties on random points") {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const Index p = 1 + static_cast<Index>(rng.uniform() * 6);
    const Index n = p + static_cast<Index>(rng.uniform() * 10);
    const StiefelPoint x = orthonormalize_qr(rng.gaussian_matrix(n, p));
    const Mat g = rng.gaussian_matrix(n, p);
    const double gamma = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
    auto [xp, info] = correct_once(x, g, with_gamma(gamma));
    CHECK(info.model_decrease >= -1e-12);
    CHECK(feasibility_violation(xp.value()) <= 1e-12);
    // linear model <G, X> + gamma/2 ||X - Xbar||^2 never increases
    const double before = (g.array() * x.value().array()).sum();
    const double after = (g.array() * xp.value().array()).sum() +
                         0.5 * gamma * (xp.value() - x.value()).squaredNorm();
    CHECK(after <= before + 1e-12 * (1.0 + std::abs(before)));
    CHECK(info.ball_lhs <= info.ball_rhs + 1e-10);
  }

  // zero branch leaves a symmetric multiplier behind
  const StiefelPoint x = orthonormalize_qr(rng.gaussian_matrix(7, 3));
  Mat s = rng.gaussian_matrix(3, 3) * 1e-16;
  const Mat g = (x.value() * (0.4 * Mat::Identity(3, 3) + s) + (Mat::Identity(7, 7) - x.value() * x.value().transpose()) * rng.gaussian_matrix(7, 3)).eval();
  CorrectionConfig cfg = with_gamma(0.4);
  auto [same, info] = correct_once(x, g, cfg);
  CHECK_FALSE(info.applied);
  CHECK(symmetry_violation(x, g) <= 2.0 * cfg.zero_tol());
}

TEST_CASE("correction sweep") {
  const QuadraticProblem prob = gen_problem1(default_params(Family::Quadratic, 20, 3, 4));
  const StiefelPoint x = initial_point(20, 3, 4, 1);
  CorrectionConfig cfg = with_gamma(2.0 * prob.rho_bound());
  cfg.schedule = CorrectionSchedule::fixed(3);
  const SweepResult r = correction_sweep(x, prob, cfg, 1);
  CHECK(r.infos.size() <= 3);
  CHECK_FALSE(r.infos.empty());
  CHECK((r.gradient - prob.gradient(r.x.value())).norm() <= 1e-14);
  CHECK(r.f == prob.value(r.x.value()));
  // each repetition starts from the previous output
  for (std::size_t i = 1; i < r.infos.size(); ++i) CHECK(r.infos[i].f_before == r.infos[i - 1].f_after);
  for (const CorrectionInfo& info : r.infos) CHECK(info.f_after <= info.f_before + 1e-12);

  cfg.schedule = CorrectionSchedule::growing();
  CHECK(correction_sweep(x, prob, cfg, 17).infos.size() <= 5);

  CorrectionConfig bad;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = CorrectionConfig{};
  bad.schedule = CorrectionSchedule::fixed(0);
  CHECK_THROWS_AS(bad.validate(), Error);
}
