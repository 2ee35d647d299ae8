#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mcm {

/// Dense column-major real matrix; entry (i, j) lives at data()[i + j * rows()].
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class NotOnManifold : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

inline constexpr double kFeasTol = 1e-12;
inline constexpr double kRankTol = 1e-12;

/// Throws NonFinite if any entry is NaN or infinite, or the matrix is empty.
void require_finite(const Mat& m, const char* what);

/// An n-by-p matrix with orthonormal columns.
///
/// The constructor checks ||X^T X - I||_F <= tol and throws NotOnManifold
/// otherwise, so every StiefelPoint in the program is feasible by type.
class StiefelPoint {
 public:
  explicit StiefelPoint(Mat value, double tol = kFeasTol);

  const Mat& value() const { return value_; }
  Index n() const { return value_.rows(); }
  Index p() const { return value_.cols(); }

  operator const Mat&() const { return value_; }

 private:
  Mat value_;
};

/// Q factor of the reduced QR decomposition with diag(R) >= 0.
StiefelPoint orthonormalize_qr(const Mat& w);

/// Nearest Stiefel point R T^T, where W = R S T^T is the reduced SVD.
StiefelPoint project_stiefel_polar(const Mat& w);

/// Returns W itself if it is within tolerance of the manifold, otherwise its
/// QR orthonormalization. Used to absorb round-off drift in iterative updates.
StiefelPoint restore_feasibility(Mat w, double tol = kFeasTol);

/// c(X) = G - X G^T X.
Mat residual_c(const StiefelPoint& x, const Mat& g);

/// ||(I - X X^T) G||_F, applied through p-column products.
double substationarity(const StiefelPoint& x, const Mat& g);

/// ||X^T G - G^T X||_F.
double symmetry_violation(const StiefelPoint& x, const Mat& g);

/// ||X^T X - I_p||_F for an arbitrary (not necessarily feasible) matrix.
double feasibility_violation(const Mat& x);

/// Largest singular value of an arbitrary matrix, via the smaller Gram matrix.
double spectral_norm(const Mat& a);

/// Frobenius inner product tr(A^T B).
double inner(const Mat& a, const Mat& b);

}  // namespace mcm
