#include "mcm/problems.hpp"

#include <cmath>
#include <sstream>

#include "mcm/rng.hpp"

namespace mcm {
namespace {

void require_shape(const Mat& x, Index rows, Index cols, const char* what) {
  if (x.rows() != rows || x.cols() != cols) {
    std::ostringstream os;
    os << what << ": expected " << rows << "x" << cols << ", got " << x.rows() << "x" << x.cols();
    throw DimensionMismatch(os.str());
  }
}

void require_symmetric(const Mat& m, const char* what) {
  require_finite(m, what);
  if (m.rows() != m.cols()) throw DimensionMismatch(std::string(what) + ": not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
    throw Error(std::string(what) + ": matrix is not symmetric");
}

// Psi_ii = sign_i * magnitude_i with sign negative iff the uniform draw is >= 0.5.
double signed_by(double draw, double magnitude) { return draw < 0.5 ? magnitude : -magnitude; }

Mat conjugate_diagonal(const Mat& e, const Vec& psi) {
  Mat m = (e * psi.asDiagonal()) * e.transpose();
  return 0.5 * (m + m.transpose());
}

}  // namespace

std::string to_string(Family family) {
  return family == Family::Quadratic ? "quadratic" : "brockett";
}

Family family_from_string(const std::string& name) {
  if (name == "quadratic" || name == "problem1") return Family::Quadratic;
  if (name == "brockett" || name == "problem2") return Family::Brockett;
  throw Error("unknown problem family '" + name + "'");
}

void GenParams::validate(Family family) const {
  std::ostringstream os;
  if (n < 1 || p < 1 || p > n) {
    os << "need 1 <= p <= n, got n = " << n << ", p = " << p;
  } else if (!(eta >= 1.0)) {
    os << "eta must be >= 1, got " << eta;
  } else if (!(zeta >= 1.0)) {
    os << "zeta must be >= 1, got " << zeta;
  } else if (!(alpha > 0.0)) {
    os << "alpha must be > 0, got " << alpha;
  } else if (family == Family::Brockett && !(beta >= 1.0)) {
    os << "beta must be >= 1, got " << beta;
  }
  if (!os.str().empty()) throw Error("invalid generator parameters: " + os.str());
  if (n > kDefaultSizeCap && !allow_large) {
    std::ostringstream big;
    big << "n = " << n << " exceeds the desk-scale cap " << kDefaultSizeCap
        << " (pass allow_large to override)";
    throw InstanceTooLarge(big.str());
  }
}

GenParams default_params(Family family, Index n, Index p, std::uint64_t seed) {
  GenParams g;
  g.n = n;
  g.p = p;
  g.seed = seed;
  if (family == Family::Quadratic) {
    g.eta = 1.01;
    g.zeta = 1.01;
    g.alpha = 1.0;
    g.beta = 1.0;
  } else {
    g.eta = 1.05;
    g.zeta = 1.05;
    g.beta = 2.0;
    g.alpha = 0.1;
  }
  return g;
}

double power_iteration_norm(const Mat& m, double rel_tol, Index max_iter) {
  const Index n = m.rows();
  if (max_iter < 0) max_iter = 10 * n;
  Rng rng(0x5eed5eed5eedULL);
  Vec x = rng.gaussian_matrix(n, 1).col(0);
  x.normalize();
  double prev = 0.0;
  for (Index it = 0; it < max_iter; ++it) {
    Vec y = m * x;
    const double est = y.norm();
    if (est == 0.0) return 0.0;
    if (it > 0 && std::abs(est - prev) <= rel_tol * est) return est;
    prev = est;
    x = y / est;
  }
  std::ostringstream os;
  os << "power iteration did not reach " << rel_tol << " relative accuracy in " << max_iter
     << " steps";
  throw PowerIterationStalled(os.str());
}

double symmetric_spectral_norm(const Mat& m) {
  if (m.rows() <= kDenseNormLimit) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return power_iteration_norm(m);
}

QuadraticProblem::QuadraticProblem(Mat m, Mat n) : m_(std::move(m)), n_(std::move(n)) {
  require_symmetric(m_, "QuadraticProblem M");
  require_finite(n_, "QuadraticProblem N");
  if (n_.rows() != m_.rows() || n_.cols() > n_.rows())
    throw DimensionMismatch("QuadraticProblem: N must be n x p with p <= n");
  bounds_ = rho_and_scale(*this);
}

double QuadraticProblem::value(const Mat& x) const {
  require_shape(x, rows(), cols(), "f1");
  return 0.5 * (x.array() * (m_ * x).array()).sum() + (n_.array() * x.array()).sum();
}

Mat QuadraticProblem::gradient(const Mat& x) const {
  require_shape(x, rows(), cols(), "grad_f1");
  return m_ * x + n_;
}

std::optional<double> QuadraticProblem::gradient_norm_bound() const {
  return bounds_.rho * std::sqrt(static_cast<double>(cols())) + n_.norm();
}

std::optional<ColumnQuadratic> QuadraticProblem::column_quadratic(const Mat& /*x*/,
                                                                  Index i) const {
  return ColumnQuadratic{&m_, 1.0, n_.col(i)};
}

BrockettProblem::BrockettProblem(Mat a, Vec d) : a_(std::move(a)), d_(std::move(d)) {
  require_symmetric(a_, "BrockettProblem A");
  if (d_.size() < 1 || d_.size() > a_.rows() || !d_.allFinite())
    throw DimensionMismatch("BrockettProblem: d must have 1 <= p <= n finite entries");
  bounds_ = rho_and_scale(*this);
}

double BrockettProblem::value(const Mat& x) const {
  require_shape(x, rows(), cols(), "f2");
  const Mat ax = a_ * x;
  double total = 0.0;
  for (Index j = 0; j < x.cols(); ++j) total += d_(j) * x.col(j).dot(ax.col(j));
  return 0.5 * total;
}

Mat BrockettProblem::gradient(const Mat& x) const {
  require_shape(x, rows(), cols(), "grad_f2");
  return (a_ * x) * d_.asDiagonal();
}

std::optional<double> BrockettProblem::gradient_norm_bound() const {
  return bounds_.rho * std::sqrt(static_cast<double>(cols()));
}

std::optional<ColumnQuadratic> BrockettProblem::column_quadratic(const Mat& /*x*/,
                                                                 Index i) const {
  return ColumnQuadratic{&a_, d_(i), Vec::Zero(rows())};
}

SpectralBounds rho_and_scale(const QuadraticProblem& prob) {
  const double norm = symmetric_spectral_norm(prob.m());
  return {norm, norm};
}

SpectralBounds rho_and_scale(const BrockettProblem& prob) {
  const double norm = symmetric_spectral_norm(prob.a()) * prob.d().cwiseAbs().maxCoeff();
  return {norm, norm};
}

Draws draw_problem1(const GenParams& params) {
  params.validate(Family::Quadratic);
  Rng rng(params.seed);
  Draws d;
  d.e_gauss = rng.gaussian_matrix(params.n, params.n);
  d.omega = rng.uniform_vector(params.n);
  d.q_gauss = rng.gaussian_matrix(params.n, params.p);
  return d;
}

Draws draw_problem2(const GenParams& params) {
  params.validate(Family::Brockett);
  Rng rng(params.seed);
  Draws d;
  d.e_gauss = rng.gaussian_matrix(params.n, params.n);
  d.omega = rng.uniform_vector(params.n);
  d.theta = rng.uniform_vector(params.p);
  return d;
}

QuadraticProblem build_problem1(const GenParams& params, const Draws& draws) {
  const Index n = params.n;
  const Index p = params.p;
  const Mat e = orthonormalize_qr(draws.e_gauss).value();
  Vec psi(n);
  for (Index i = 0; i < n; ++i)
    psi(i) = signed_by(draws.omega(i), std::pow(params.eta, -static_cast<double>(i)));
  Mat nmat(n, p);
  for (Index j = 0; j < p; ++j) {
    const double dj = std::pow(params.zeta, -static_cast<double>(j));
    nmat.col(j) = params.alpha * dj * draws.q_gauss.col(j) / draws.q_gauss.col(j).norm();
  }
  return QuadraticProblem(conjugate_diagonal(e, psi), std::move(nmat));
}

BrockettProblem build_problem2(const GenParams& params, const Draws& draws) {
  const Index n = params.n;
  const Index p = params.p;
  const Mat e = orthonormalize_qr(draws.e_gauss).value();
  Vec psi(n);
  for (Index i = 0; i < n; ++i)
    psi(i) = signed_by(draws.omega(i), std::pow(params.eta, -static_cast<double>(i)) + params.beta);
  Vec d(p);
  for (Index j = 0; j < p; ++j)
    d(j) = signed_by(draws.theta(j), params.alpha * std::pow(params.zeta, -static_cast<double>(j)));
  return BrockettProblem(conjugate_diagonal(e, psi), std::move(d));
}

QuadraticProblem gen_problem1(const GenParams& params) {
  return build_problem1(params, draw_problem1(params));
}

BrockettProblem gen_problem2(const GenParams& params) {
  return build_problem2(params, draw_problem2(params));
}

std::unique_ptr<ObjectiveModel> generate(Family family, const GenParams& params) {
  if (family == Family::Quadratic) return std::make_unique<QuadraticProblem>(gen_problem1(params));
  return std::make_unique<BrockettProblem>(gen_problem2(params));
}

std::string InstanceMeta::file_stem() const {
  std::ostringstream os;
  os << to_string(family) << '_' << params.n << '_' << params.p << '_' << params.seed;
  return os.str();
}

nlohmann::json to_json(const InstanceMeta& meta) {
  const GenParams& g = meta.params;
  return nlohmann::json{{"family", to_string(meta.family)},
                        {"n", g.n},
                        {"p", g.p},
                        {"eta", g.eta},
                        {"zeta", g.zeta},
                        {"alpha", g.alpha},
                        {"beta", g.beta},
                        {"seed", g.seed},
                        {"rng", kRngTag}};
}

InstanceMeta instance_from_json(const nlohmann::json& j) {
  InstanceMeta meta;
  meta.family = family_from_string(j.at("family").get<std::string>());
  if (j.contains("rng") && j.at("rng").get<std::string>() != kRngTag)
    throw Error("instance was generated with rng '" + j.at("rng").get<std::string>() +
                "', this build uses '" + kRngTag + "'");
  GenParams& g = meta.params;
  g = default_params(meta.family, j.at("n").get<Index>(), j.at("p").get<Index>(),
                     j.at("seed").get<std::uint64_t>());
  if (j.contains("eta")) g.eta = j.at("eta").get<double>();
  if (j.contains("zeta")) g.zeta = j.at("zeta").get<double>();
  if (j.contains("alpha")) g.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) g.beta = j.at("beta").get<double>();
  return meta;
}

StiefelPoint initial_point(Index n, Index p, std::uint64_t instance_seed,
                           std::uint64_t master_seed) {
  Rng rng(master_seed ^ instance_seed);
  return orthonormalize_qr(rng.gaussian_matrix(n, p));
}

}  // namespace mcm
