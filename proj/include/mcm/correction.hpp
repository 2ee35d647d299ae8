#pragma once

#include <utility>
#include <vector>

#include "mcm/linalg.hpp"
#include "mcm/problems.hpp"

namespace mcm {

class NotOrthogonal : public Error {
 public:
  using Error::Error;
};

struct CorrectionSchedule {
  enum class Kind { Fixed, Growing };
  Kind kind = Kind::Fixed;
  long count = 1;  // used by Fixed

  static CorrectionSchedule fixed(long m) { return {Kind::Fixed, m}; }
  static CorrectionSchedule growing() { return {Kind::Growing, 0}; }
};

struct CorrectionConfig {
  double gamma = 1.0;
  CorrectionSchedule schedule;
  double z_zero_tol = -1.0;  // negative: 1e-14 * (1 + gamma)

  double zero_tol() const { return z_zero_tol >= 0.0 ? z_zero_tol : 1e-14 * (1.0 + gamma); }
  void validate() const;
};

/// What one correction did. f_* and sym_after are filled by correction_sweep,
/// which is the caller that evaluates the objective.
struct CorrectionInfo {
  bool applied = false;
  double sigma_trace = 0.0;     // tr(Sigma)
  double model_decrease = 0.0;  // tr(Sigma + U Sigma V^T)
  double sym_before = 0.0;
  double sym_after = 0.0;
  double f_before = 0.0;
  double f_after = 0.0;
  double grad_norm2 = 0.0;  // ||G||_2 at the input point
  double dist = 0.0;        // ||X+ - Xbar||_F
  double ball_lhs = 0.0;    // ||X+ - Xbar + G / gamma||_F
  double ball_rhs = 0.0;    // ||G||_F / gamma
};

/// One proximal correction X+ = Xbar Q, Q = -U V^T from the SVD of Xbar^T G - gamma I.
std::pair<StiefelPoint, CorrectionInfo> correct_once(const StiefelPoint& x_bar, const Mat& g,
                                                     const CorrectionConfig& cfg);

/// 2 ceil(sqrt(k) / 2) - 1, evaluated in integer arithmetic. k >= 1.
long delta_schedule(long k);

/// Number of corrections the schedule asks for at (1-based) iteration k.
long corrections_for(const CorrectionSchedule& schedule, long k);

struct SweepResult {
  StiefelPoint x;
  std::vector<CorrectionInfo> infos;
  Mat gradient;  // at x
  double f = 0.0;
};

/// Repeats correct_once with the gradient recomputed at each new point, stopping
/// early once a correction leaves the point unchanged.
SweepResult correction_sweep(const StiefelPoint& x_bar, const ObjectiveModel& model,
                             const CorrectionConfig& cfg, long k);

/// g(Q_test) - g(Q*) with g(Q) = tr(Q^T Z), Z = Xbar^T G - gamma I.
double rotation_optimality_gap(const StiefelPoint& x_bar, const Mat& g, double gamma,
                               const Mat& q_test);

}  // namespace mcm
