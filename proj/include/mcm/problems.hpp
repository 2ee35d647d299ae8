#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "mcm/linalg.hpp"

namespace mcm {

class PowerIterationStalled : public Error {
 public:
  using Error::Error;
};

class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

/// Column-separable quadratic restriction of an objective:
/// as a function of column i alone, f = 0.5 * weight * x^T H x + linear^T x + const.
struct ColumnQuadratic {
  const Mat* hessian = nullptr;
  double weight = 1.0;
  Vec linear;
};

/// Smooth objective over n x p matrices.
class ObjectiveModel {
 public:
  virtual ~ObjectiveModel() = default;

  virtual Index rows() const = 0;
  virtual Index cols() const = 0;

  virtual double value(const Mat& x) const = 0;
  virtual Mat gradient(const Mat& x) const = 0;

  /// Bound on the Hessian spectral norm near the manifold.
  virtual double rho_bound() const = 0;
  /// Estimate of ||Hess f(0)||_2, used to scale gamma and the first stepsize.
  virtual double scale() const = 0;

  /// Upper bound on max ||grad f(X)||_2 over the manifold, when cheap to state.
  virtual std::optional<double> gradient_norm_bound() const { return std::nullopt; }

  /// Exact per-column quadratic data, when the objective separates by columns.
  virtual std::optional<ColumnQuadratic> column_quadratic(const Mat& /*x*/, Index /*i*/) const {
    return std::nullopt;
  }
};

enum class Family { Quadratic, Brockett };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

struct GenParams {
  Index n = 0;
  Index p = 0;
  double eta = 1.0;
  double zeta = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t seed = 0;
  bool allow_large = false;

  void validate(Family family) const;
};

inline constexpr Index kDefaultSizeCap = 4000;

/// Defaults used by the generators unless overridden.
GenParams default_params(Family family, Index n, Index p, std::uint64_t seed);

struct SpectralBounds {
  double rho = 0.0;
  double scale = 0.0;
};

/// ||M||_2 for symmetric M. Exact symmetric eigensolve up to kDenseNormLimit,
/// power iteration (1e-8 relative, at most 10n steps) beyond.
double symmetric_spectral_norm(const Mat& m);
inline constexpr Index kDenseNormLimit = 512;

/// Power iteration on M^2 for ||M||_2; throws PowerIterationStalled.
double power_iteration_norm(const Mat& m, double rel_tol = 1e-8, Index max_iter = -1);

/// f1(X) = 0.5 tr(X^T M X) + tr(N^T X).
class QuadraticProblem final : public ObjectiveModel {
 public:
  QuadraticProblem(Mat m, Mat n);

  const Mat& m() const { return m_; }
  const Mat& n_mat() const { return n_; }

  Index rows() const override { return n_.rows(); }
  Index cols() const override { return n_.cols(); }
  double value(const Mat& x) const override;
  Mat gradient(const Mat& x) const override;
  double rho_bound() const override { return bounds_.rho; }
  double scale() const override { return bounds_.scale; }
  std::optional<double> gradient_norm_bound() const override;
  std::optional<ColumnQuadratic> column_quadratic(const Mat& x, Index i) const override;

 private:
  Mat m_;
  Mat n_;
  SpectralBounds bounds_;
};

/// f2(X) = 0.5 tr(D X^T A X) with D = Diag(d).
class BrockettProblem final : public ObjectiveModel {
 public:
  BrockettProblem(Mat a, Vec d);

  const Mat& a() const { return a_; }
  const Vec& d() const { return d_; }

  Index rows() const override { return a_.rows(); }
  Index cols() const override { return d_.size(); }
  double value(const Mat& x) const override;
  Mat gradient(const Mat& x) const override;
  double rho_bound() const override { return bounds_.rho; }
  double scale() const override { return bounds_.scale; }
  std::optional<double> gradient_norm_bound() const override;
  std::optional<ColumnQuadratic> column_quadratic(const Mat& x, Index i) const override;

 private:
  Mat a_;
  Vec d_;
  SpectralBounds bounds_;
};

SpectralBounds rho_and_scale(const QuadraticProblem& prob);
SpectralBounds rho_and_scale(const BrockettProblem& prob);

/// Raw random draws behind a generated instance, in draw order.
struct Draws {
  Mat e_gauss;  // n x n, column-major
  Vec omega;    // n
  Mat q_gauss;  // n x p (quadratic family only)
  Vec theta;    // p (Brockett family only)
};

Draws draw_problem1(const GenParams& params);
Draws draw_problem2(const GenParams& params);

QuadraticProblem build_problem1(const GenParams& params, const Draws& draws);
BrockettProblem build_problem2(const GenParams& params, const Draws& draws);

QuadraticProblem gen_problem1(const GenParams& params);
BrockettProblem gen_problem2(const GenParams& params);

std::unique_ptr<ObjectiveModel> generate(Family family, const GenParams& params);

/// Instance metadata; matrices are always regenerated from it.
struct InstanceMeta {
  Family family = Family::Quadratic;
  GenParams params;

  std::string file_stem() const;
};

nlohmann::json to_json(const InstanceMeta& meta);
InstanceMeta instance_from_json(const nlohmann::json& j);

/// Shared random start orthonormalize_qr(randn(n, p)) seeded by master ^ instance seed.
StiefelPoint initial_point(Index n, Index p, std::uint64_t instance_seed,
                           std::uint64_t master_seed);

}  // namespace mcm
