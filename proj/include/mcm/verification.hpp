#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcm/lemma_checks.hpp"
#include "mcm/problems.hpp"
#include "mcm/solver.hpp"

namespace mcm {

/// Central differences (f(X + h E_ij) - f(X - h E_ij)) / 2h.
/// A non-positive h selects 1e-6 (1 + ||X||_F).
Mat fd_gradient(const ObjectiveModel& model, const Mat& x, double h = -1.0);

/// Wraps a value-only objective; the gradient comes from central differences.
class FiniteDifferenceModel final : public ObjectiveModel {
 public:
  using ValueFn = std::function<double(const Mat&)>;

  FiniteDifferenceModel(Index rows, Index cols, ValueFn value, double rho, double scale,
                        double h = -1.0);

  Index rows() const override { return rows_; }
  Index cols() const override { return cols_; }
  double value(const Mat& x) const override { return value_(x); }
  Mat gradient(const Mat& x) const override { return fd_gradient(*this, x, h_); }
  double rho_bound() const override { return rho_; }
  double scale() const override { return scale_; }

 private:
  Index rows_;
  Index cols_;
  ValueFn value_;
  double rho_;
  double scale_;
  double h_;
};

struct OracleResult {
  enum class Kind { EigenExact, BrockettExact, SampledBound };
  double f_lb = 0.0;
  Kind kind = Kind::EigenExact;
  std::string derivation;
};

/// 0.5 * (sum of the p smallest eigenvalues of M): the minimum of 0.5 tr(X^T M X).
OracleResult eigen_oracle_quadratic(const Mat& m, Index p);

inline constexpr Index kBrockettEnumMaxN = 12;
inline constexpr Index kBrockettEnumMaxP = 4;

/// 0.5 * min over injective assignments sigma of sum_i d_i lambda_sigma(i), by
/// exhaustive enumeration. Throws InstanceTooLarge beyond n = 12, p = 4.
OracleResult brockett_oracle(const Vec& eigvals, const Vec& d);

/// Closed form for positive, strictly descending d: the largest d_i takes the
/// smallest eigenvalue. Throws Error if d is not of that shape.
double brockett_closed_form(const Vec& eigvals, const Vec& d);

/// Lower bound from many random feasible points polished by a projected
/// gradient iteration; labelled SampledBound (it is the best value found).
OracleResult sampled_bound(const ObjectiveModel& model, int starts, std::uint64_t seed);

/// Re-derives the descent inequalities from a recorded trace. Throws Error when
/// the run did not have gamma > rho, since none of them is claimed below that.
std::vector<LemmaViolation> audit_lemmas(const SolveReport& report, const ObjectiveModel& model);

struct ComplexityCheck {
  double c1 = 0.0;  // measured sufficient-decrease constant of the reduction step
  double c2 = 0.0;
  long steps_used = 0;  // reduction steps that entered the c1 estimate
  std::vector<LemmaViolation> violations;
};

/// min_{1<=k<=K} kkt_k <= sqrt(c2 (f_0 - f_lb) / K) for every K in the trace,
/// with c1 measured as min (f_{k-1} - fbar_k) / substat_{k-1}^2 over steps
/// whose decrease is above round-off.
ComplexityCheck check_complexity(const SolveReport& report, double f_lb);

}  // namespace mcm
