#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mcm/linalg.hpp"
#include "mcm/problems.hpp"
#include "mcm/rng.hpp"

using namespace mcm;

namespace {

// Modified Gram-Schmidt, written out independently of the library's Householder QR.
Mat mgs(const Mat& w) {
  Mat q = w;
  for (Index j = 0; j < q.cols(); ++j) {
    for (Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    q.col(j) /= q.col(j).norm();
  }
  return q;
}

Mat random_stiefel(Rng& rng, Index n, Index p) { return mgs(rng.gaussian_matrix(n, p)); }

Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("rng matches an independent xoshiro256++ / splitmix64 implementation") {
  std::uint64_t s = 0;
  CHECK(splitmix64(s) == 0xe220a8397b1dcdafULL);
  Rng rng(42);
  CHECK(rng.next() == 0xd0764d4f4476689fULL);
  CHECK(rng.next() == 0x519e4174576f3791ULL);
  CHECK(rng.next() == 0xfbe07cfb0c24ed8cULL);

  Rng a(42);
  CHECK(a.uniform() == 0.8143051451229099);
  Rng b(42);
  CHECK(b.gaussian() == doctest::Approx(-0.7689930538210061).epsilon(1e-15));
}

TEST_CASE("orthonormalize_qr") {
  CHECK((orthonormalize_qr(Mat::Identity(3, 3)).value() - Mat::Identity(3, 3)).norm() == 0.0);
  CHECK((orthonormalize_qr(2.0 * Mat::Identity(3, 3)).value() - Mat::Identity(3, 3)).norm() <= 1e-15);

  const Mat w = mat({{1, 1}, {1, 0}, {0, 1}});
  const Mat q = orthonormalize_qr(w).value();
  CHECK((q - mgs(w)).norm() <= 1e-12);
  CHECK(feasibility_violation(q) <= 1e-12);
  // R = Q^T W is upper triangular with a nonnegative diagonal
  const Mat r = q.transpose() * w;
  CHECK(std::abs(r(1, 0)) <= 1e-12);
  CHECK(r(0, 0) > 0.0);
  CHECK(r(1, 1) > 0.0);

  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const Mat g = rng.gaussian_matrix(9, 4);
    CHECK((orthonormalize_qr(g).value() - mgs(g)).norm() <= 1e-12);
  }

  CHECK_THROWS_AS(orthonormalize_qr(mat({{1, 2}, {2, 4}, {3, 6}})), RankDeficient);
  CHECK_THROWS_AS(orthonormalize_qr(Mat::Zero(3, 2)), RankDeficient);
  CHECK_THROWS_AS(orthonormalize_qr(Mat::Ones(2, 3)), DimensionMismatch);
}

TEST_CASE("project_stiefel_polar") {
  Rng rng(11);
  const Mat x = random_stiefel(rng, 6, 3);
  CHECK((project_stiefel_polar(x).value() - x).norm() <= 1e-14);
  CHECK((project_stiefel_polar(3.0 * x).value() - x).norm() <= 1e-14);

  const Mat w = rng.gaussian_matrix(5, 2);
  const Mat y = project_stiefel_polar(w).value();
  const double best = (w - y).norm();
  int closer = 0;
  for (int s = 0; s < 10000; ++s) {
    if ((w - random_stiefel(rng, 5, 2)).norm() < best - 1e-12) ++closer;
  }
  CHECK(closer == 0);

  CHECK((project_stiefel_polar(y).value() - y).norm() <= 1e-12);
  CHECK_THROWS_AS(project_stiefel_polar(mat({{1, 2}, {2, 4}, {3, 6}})), RankDeficient);
}

TEST_CASE("StiefelPoint checks its invariant") {
  CHECK_THROWS_AS(StiefelPoint(2.0 * Mat::Identity(3, 2)), NotOnManifold);
  Mat bad = Mat::Identity(3, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(StiefelPoint{bad}, NonFinite);
  CHECK_NOTHROW(StiefelPoint(Mat::Identity(4, 2)));
}

TEST_CASE("residual, substationarity, symmetry and feasibility measures") {
  const StiefelPoint e1(mat({{1}, {0}}));
  CHECK((residual_c(e1, mat({{0}, {1}})) - mat({{0}, {1}})).norm() == 0.0);
  CHECK(substationarity(e1, mat({{3}, {4}})) == 4.0);

  const StiefelPoint i2(Mat::Identity(2, 2));
  const Mat g = mat({{0, 1}, {0, 0}});
  CHECK((residual_c(i2, g) - mat({{0, 1}, {-1, 0}})).norm() == 0.0);
  CHECK(symmetry_violation(i2, g) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  CHECK(feasibility_violation(2.0 * Mat::Identity(2, 2)) == doctest::Approx(3.0 * std::sqrt(2.0)));
  CHECK(feasibility_violation(Mat::Zero(5, 3)) == doctest::Approx(std::sqrt(3.0)));

  Rng rng(3);
  const StiefelPoint x(random_stiefel(rng, 7, 3));
  CHECK(residual_c(x, x.value()).norm() <= 1e-14);
  CHECK(symmetry_violation(StiefelPoint(random_stiefel(rng, 5, 1)), rng.gaussian_matrix(5, 1)) == 0.0);

  Mat s = rng.gaussian_matrix(3, 3);
  s = 0.5 * (s + s.transpose()).eval();
  const Mat gs = x.value() * s;
  CHECK(substationarity(x, gs) <= 1e-14);
  CHECK(symmetry_violation(x, gs) <= 1e-14);
  CHECK(residual_c(x, gs).norm() <= 1e-14);

  // dense projector oracle
  for (int t = 0; t < 20; ++t) {
    const StiefelPoint y(random_stiefel(rng, 10, 4));
    const Mat h = rng.gaussian_matrix(10, 4);
    const Mat proj = Mat::Identity(10, 10) - y.value() * y.value().transpose();
    const double dense = (proj * h).norm();
    CHECK(std::abs(substationarity(y, h) - dense) <= 1e-12 * dense);
  }
}

TEST_CASE("kkt residual splits into substationarity and symmetry") {
  Rng rng(2024);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const Index n = 1 + static_cast<Index>(rng.uniform() * 50);
    const Index p = 1 + static_cast<Index>(rng.uniform() * static_cast<double>(n));
    const StiefelPoint x = orthonormalize_qr(rng.gaussian_matrix(n, p));
    const Mat g = rng.gaussian_matrix(n, p);
    const double c2 = residual_c(x, g).squaredNorm();
    const double a = substationarity(x, g);
    const double b = symmetry_violation(x, g);
    worst = std::max(worst, std::abs(c2 - a * a - b * b) / c2);
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("generators are deterministic and follow the formulas") {
  const GenParams p1 = default_params(Family::Quadratic, 40, 5, 9);
  const QuadraticProblem a = gen_problem1(p1);
  const QuadraticProblem b = gen_problem1(p1);
  CHECK((a.m() - b.m()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.n_mat() - b.n_mat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p1.eta == 1.01);
  CHECK(p1.zeta == 1.01);
  CHECK(p1.alpha == 1.0);

  // eigenvalues {+-eta^(1-i)}, N column norms alpha zeta^(1-i)
  GenParams g = p1;
  g.n = 60;
  g.eta = 1.2;
  g.zeta = 1.1;
  g.alpha = 0.5;
  const QuadraticProblem q = gen_problem1(g);
  Eigen::SelfAdjointEigenSolver<Mat> es(q.m());
  std::vector<double> got(es.eigenvalues().data(), es.eigenvalues().data() + 60);
  for (double& v : got) v = std::abs(v);
  std::sort(got.begin(), got.end(), std::greater<>());
  for (Index i = 0; i < 60; ++i) CHECK(std::abs(got[i] - std::pow(1.2, -static_cast<double>(i))) <= 1e-10);
  for (Index j = 0; j < 5; ++j)
    CHECK(q.n_mat().col(j).norm() == doctest::Approx(0.5 * std::pow(1.1, -static_cast<double>(j))).epsilon(1e-14));

  GenParams flat = p1;
  flat.eta = flat.zeta = flat.alpha = 1.0;
  const QuadraticProblem f = gen_problem1(flat);
  Eigen::SelfAdjointEigenSolver<Mat> ef(f.m());
  CHECK((ef.eigenvalues().cwiseAbs().array() - 1.0).abs().maxCoeff() <= 1e-12);
  for (Index j = 0; j < 5; ++j) CHECK(f.n_mat().col(j).norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rho_and_scale(f).rho == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Brockett generator") {
  const GenParams p2 = default_params(Family::Brockett, 30, 4, 5);
  CHECK(p2.eta == 1.05);
  CHECK(p2.zeta == 1.05);
  CHECK(p2.beta == 2.0);
  CHECK(p2.alpha == 0.1);
  const BrockettProblem a = gen_problem2(p2);
  const BrockettProblem b = gen_problem2(p2);
  CHECK((a.a() - b.a()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.d() - b.d()).cwiseAbs().maxCoeff() == 0.0);
  for (Index j = 0; j < 4; ++j)
    CHECK(std::abs(a.d()(j)) == doctest::Approx(0.1 * std::pow(1.05, -static_cast<double>(j))));

  GenParams g = p2;
  g.eta = 1.0;
  g.beta = 1.0;
  const BrockettProblem two = gen_problem2(g);
  CHECK(symmetric_spectral_norm(two.a()) == doctest::Approx(2.0).epsilon(1e-12));

  // injected draws with every theta below 0.5 give D = I when alpha = zeta = 1
  GenParams unit = p2;
  unit.alpha = 1.0;
  unit.zeta = 1.0;
  Draws d = draw_problem2(unit);
  d.theta.setConstant(0.25);
  const BrockettProblem id = build_problem2(unit, d);
  CHECK((id.d() - Vec::Ones(4)).norm() == 0.0);
}

TEST_CASE("objective values and gradients") {
  Rng rng(1);
  const Mat x = random_stiefel(rng, 6, 2);
  const QuadraticProblem ident(Mat::Identity(6, 6), Mat::Zero(6, 2));
  CHECK(ident.value(x) == doctest::Approx(1.0).epsilon(1e-14));

  Mat m = Mat::Zero(3, 3);
  m.diagonal() << 1, 2, 3;
  const QuadraticProblem diag(m, Mat::Zero(3, 1));
  const Mat e1 = Mat::Identity(3, 1);
  CHECK(diag.value(e1) == 0.5);
  CHECK((diag.gradient(e1) - e1).norm() == 0.0);
  CHECK(rho_and_scale(diag).rho == doctest::Approx(3.0).epsilon(1e-14));

  // M = I: only the linear part changes under a rotation X -> X Q
  const Mat nmat = rng.gaussian_matrix(6, 2);
  const QuadraticProblem lin(Mat::Identity(6, 6), nmat);
  const Mat qrot = mgs(rng.gaussian_matrix(2, 2));
  const Mat xq = x * qrot;
  CHECK(lin.value(xq) - lin.value(x) == doctest::Approx((nmat.transpose() * (xq - x)).trace()).epsilon(1e-12));

  const BrockettProblem zero_d(Mat::Identity(6, 6), Vec::Zero(2));
  CHECK(zero_d.value(x) == 0.0);
  CHECK(zero_d.gradient(x).norm() == 0.0);
  Vec d(2);
  d << 5, -2;
  const BrockettProblem eye(Mat::Identity(6, 6), d);
  CHECK(eye.value(x) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(eye.rho_bound() == doctest::Approx(5.0).epsilon(1e-14));

  CHECK_THROWS_AS(diag.value(Mat::Zero(4, 1)), DimensionMismatch);
  CHECK_THROWS_AS(eye.gradient(Mat::Zero(6, 3)), DimensionMismatch);
}

TEST_CASE("spectral norm paths agree") {
  Rng rng(5);
  Mat a = rng.gaussian_matrix(80, 80);
  a = 0.5 * (a + a.transpose()).eval();
  a += 30.0 * Vec::Ones(80) * Vec::Ones(80).transpose() / 80.0;  // isolate the top eigenvalue
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const double exact = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(power_iteration_norm(a) == doctest::Approx(exact).epsilon(1e-7));
  CHECK(symmetric_spectral_norm(a) == doctest::Approx(exact).epsilon(1e-14));
  CHECK_THROWS_AS(power_iteration_norm(a, 1e-8, 2), PowerIterationStalled);
}

TEST_CASE("parameter validation and the size guard") {
  GenParams g = default_params(Family::Quadratic, 10, 11, 1);
  CHECK_THROWS_AS(g.validate(Family::Quadratic), Error);
  g = default_params(Family::Quadratic, 10, 2, 1);
  g.eta = 0.5;
  CHECK_THROWS_AS(g.validate(Family::Quadratic), Error);
  g = default_params(Family::Brockett, 10, 2, 1);
  g.beta = 0.5;
  CHECK_THROWS_AS(g.validate(Family::Brockett), Error);

  GenParams big = default_params(Family::Quadratic, 4001, 2, 1);
  CHECK_THROWS_AS(big.validate(Family::Quadratic), InstanceTooLarge);
  big.allow_large = true;
  CHECK_NOTHROW(big.validate(Family::Quadratic));
}

TEST_CASE("instance metadata round trip") {
  InstanceMeta meta{Family::Brockett, default_params(Family::Brockett, 12, 3, 77)};
  const auto j = to_json(meta);
  CHECK(j.at("rng") == kRngTag);
  CHECK(meta.file_stem() == "brockett_12_3_77");
  const InstanceMeta back = instance_from_json(j);
  CHECK(to_json(back) == j);

  auto other = j;
  other["rng"] = "mt19937/v0";
  CHECK_THROWS_AS(instance_from_json(other), Error);
}

TEST_CASE("shared starting point") {
  const StiefelPoint a = initial_point(20, 4, 3, 2024);
  const StiefelPoint b = initial_point(20, 4, 3, 2024);
  CHECK((a.value() - b.value()).norm() == 0.0);
  CHECK(feasibility_violation(a.value()) <= 1e-12);
  const StiefelPoint c = initial_point(20, 4, 3, 2025);
  CHECK((a.value() - c.value()).norm() > 0.1);
}
