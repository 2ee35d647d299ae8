#include "mcm/linalg.hpp"

#include <cmath>
#include <sstream>

namespace mcm {
namespace {

void require_tall(const Mat& w, const char* what) {
  if (w.rows() < 1 || w.cols() < 1 || w.cols() > w.rows()) {
    std::ostringstream os;
    os << what << ": expected n x p with 1 <= p <= n, got " << w.rows() << " x " << w.cols();
    throw DimensionMismatch(os.str());
  }
}

void require_same_shape(const Mat& a, const Mat& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw DimensionMismatch(os.str());
  }
}

// Singular values of the p x p triangular factor equal those of W.
void require_full_rank(const Mat& r, const char* what) {
  const Vec sv = Eigen::JacobiSVD<Mat>(r).singularValues();
  const double largest = sv(0);
  const double smallest = sv(sv.size() - 1);
  if (!(largest > 0.0) || !(smallest > kRankTol * largest)) {
    std::ostringstream os;
    os << what << ": numerically rank deficient (sigma_min = " << smallest
       << ", sigma_max = " << largest << ")";
    throw RankDeficient(os.str());
  }
}

}  // namespace

void require_finite(const Mat& m, const char* what) {
  if (m.size() == 0) throw DimensionMismatch(std::string(what) + ": empty matrix");
  if (!m.allFinite()) throw NonFinite(std::string(what) + ": non-finite entry");
}

StiefelPoint::StiefelPoint(Mat value, double tol) : value_(std::move(value)) {
  require_finite(value_, "StiefelPoint");
  require_tall(value_, "StiefelPoint");
  const double feas = feasibility_violation(value_);
  if (!(feas <= tol)) {
    std::ostringstream os;
    os << "StiefelPoint: ||X^T X - I||_F = " << feas << " exceeds " << tol;
    throw NotOnManifold(os.str());
  }
}

StiefelPoint orthonormalize_qr(const Mat& w) {
  require_finite(w, "orthonormalize_qr");
  require_tall(w, "orthonormalize_qr");
  const Index n = w.rows();
  const Index p = w.cols();

  Eigen::HouseholderQR<Mat> qr(w);
  const Mat r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  require_full_rank(r, "orthonormalize_qr");

  Mat q = qr.householderQ() * Mat::Identity(n, p);
  for (Index j = 0; j < p; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return StiefelPoint(std::move(q));
}

StiefelPoint project_stiefel_polar(const Mat& w) {
  require_finite(w, "project_stiefel_polar");
  require_tall(w, "project_stiefel_polar");
  const Index n = w.rows();
  const Index p = w.cols();

  // W = Q R and R = U S V^T give W = (Q U) S V^T, so the polar factor is Q U V^T.
  Eigen::HouseholderQR<Mat> qr(w);
  const Mat r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Mat> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || !(sv(p - 1) > kRankTol * sv(0))) {
    std::ostringstream os;
    os << "project_stiefel_polar: numerically rank deficient (sigma_min = " << sv(p - 1)
       << ", sigma_max = " << sv(0) << ")";
    throw RankDeficient(os.str());
  }
  Mat uvt = svd.matrixU() * svd.matrixV().transpose();
  Mat out = qr.householderQ() * (Mat(n, p) << uvt, Mat::Zero(n - p, p)).finished();
  return StiefelPoint(std::move(out));
}

StiefelPoint restore_feasibility(Mat w, double tol) {
  if (feasibility_violation(w) <= tol) return StiefelPoint(std::move(w), tol);
  return orthonormalize_qr(w);
}

Mat residual_c(const StiefelPoint& x, const Mat& g) {
  require_same_shape(x.value(), g, "residual_c");
  const Mat& xv = x.value();
  return g - xv * (g.transpose() * xv);
}

double substationarity(const StiefelPoint& x, const Mat& g) {
  require_same_shape(x.value(), g, "substationarity");
  const Mat& xv = x.value();
  return (g - xv * (xv.transpose() * g)).norm();
}

double symmetry_violation(const StiefelPoint& x, const Mat& g) {
  require_same_shape(x.value(), g, "symmetry_violation");
  const Mat xtg = x.value().transpose() * g;
  return (xtg - xtg.transpose()).norm();
}

double feasibility_violation(const Mat& x) {
  const Index p = x.cols();
  return (x.transpose() * x - Mat::Identity(p, p)).norm();
}

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  const Mat gram = a.rows() >= a.cols() ? Mat(a.transpose() * a) : Mat(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double inner(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "inner");
  return (a.array() * b.array()).sum();
}

}  // namespace mcm
