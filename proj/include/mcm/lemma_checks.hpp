#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcm/correction.hpp"

namespace mcm {

/// A descent inequality that failed on a recorded step.
struct LemmaViolation {
  long k = 0;
  std::string check;  // correction_decrease | symmetry_bound | distance_bound | ball | monotone | complexity
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Constants the inequalities depend on. grad_bound is the gradient-norm
/// constant M used in c_gamma = M + gamma.
struct LemmaConstants {
  double rho = 0.0;
  double gamma = 0.0;
  double grad_bound = 0.0;
};

inline constexpr double kAuditRelTol = 1e-8;

/// Tolerance 1e-8 (1 + |f|).
inline double audit_tol(double f) { return kAuditRelTol * (1.0 + std::abs(f)); }

/// Checks one applied correction against the sufficient-decrease, symmetry,
/// distance and ball inequalities. Requires gamma > rho.
void check_correction(const CorrectionInfo& info, long k, const LemmaConstants& c,
                      std::vector<LemmaViolation>& out);

/// f_next <= f_prev within the audit tolerance.
void check_monotone(long k, double f_prev, double f_next, std::vector<LemmaViolation>& out);

}  // namespace mcm
