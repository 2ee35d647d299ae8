#pragma once

#include <optional>

#include "mcm/linalg.hpp"
#include "mcm/problems.hpp"

namespace mcm {

class StepFailed : public Error {
 public:
  using Error::Error;
};

class SubproblemFailed : public Error {
 public:
  using Error::Error;
};

enum class StepKind { GR, GP, CBCD };

enum class CbcdMode { ExactTRS, ProjGradFallback };

struct TauPolicy {
  enum class Kind { Fixed, ABB };
  Kind kind = Kind::ABB;
  double value = 0.0;  // used by Fixed

  static TauPolicy fixed(double tau) { return {Kind::Fixed, tau}; }
  static TauPolicy abb() { return {Kind::ABB, 0.0}; }
};

struct StepConfig {
  StepKind kind = StepKind::GP;
  TauPolicy tau_policy = TauPolicy::abb();
  double tau_min = 1e-10;  // in units of 1 / scale
  double tau_max = 1e4;    // in units of 1 / scale
  double cbcd_k1 = 1e-4;
  double cbcd_k2 = 1e-4;
  CbcdMode cbcd_mode = CbcdMode::ExactTRS;

  void validate() const;
};

/// Gradient reflection: (-I + 2 V (V^T V)^+ V^T) X with V = X - tau G.
StiefelPoint step_gr(const StiefelPoint& x, const Mat& g, double tau);

/// Gradient projection: P_S(X - tau G). Throws RankDeficient.
StiefelPoint step_gp(const StiefelPoint& x, const Mat& g, double tau);

/// Result of a minimization of 0.5 z^T H z + b^T z over the unit sphere.
struct SphereQuadraticSolution {
  Vec z;
  double value = 0.0;
  double multiplier = 0.0;  // mu with (H + mu I) z = -b
  bool hard_case = false;
};

/// Global minimizer of 0.5 z^T H z + b^T z subject to ||z|| = 1.
/// Throws SubproblemFailed if the secular iteration stalls. When the minimizer
/// is not unique, the one closest to `reference` (if given) is returned.
SphereQuadraticSolution cbcd_column_exact(const Mat& h, const Vec& b,
                                          const Vec* reference = nullptr);

/// One Gauss-Seidel sweep of column-wise block coordinate descent.
StiefelPoint step_cbcd(const StiefelPoint& x, const ObjectiveModel& model,
                       const StepConfig& cfg);

/// Dispatches on cfg.kind. GP halves tau on rank deficiency (at most 30
/// times) and throws StepFailed after that; tau_used reports the accepted value.
struct ReductionResult {
  StiefelPoint x_bar;
  double tau_used = 0.0;
};
ReductionResult reduction_step(const StiefelPoint& x, const Mat& g, const ObjectiveModel& model,
                               const StepConfig& cfg, double tau);

/// History for the alternating Barzilai-Borwein rule.
struct BBState {
  std::optional<Mat> prev_x;
  std::optional<Mat> prev_c;
  double tau = 0.0;
  long k = 0;
};

/// Alternating BB stepsize: BB1 on odd k, BB2 on even k, with
/// J = X_k - X_{k-1} and K = c_k - c_{k-1}. Without history returns
/// 1/scale. Always clamped to [tau_min, tau_max] / scale; updates the state.
double bb_tau(BBState& state, const Mat& x, const Mat& c, long k, const StepConfig& cfg,
              double scale);

}  // namespace mcm
