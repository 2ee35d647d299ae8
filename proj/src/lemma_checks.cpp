#include "mcm/lemma_checks.hpp"

#include <cmath>

namespace mcm {

void check_correction(const CorrectionInfo& info, long k, const LemmaConstants& c,
                      std::vector<LemmaViolation>& out) {
  if (!info.applied) return;
  const double tol = audit_tol(info.f_before);
  const double decrease = info.f_before - info.f_after;

  const double c_gamma = c.grad_bound + c.gamma;
  const double need = info.sym_before * info.sym_before / (8.0 * c_gamma);
  if (decrease < need - tol) out.push_back({k, "correction_decrease", decrease, need});

  const double sym_cap = 2.0 * (c.rho + c.gamma) * info.dist;
  if (info.sym_after > sym_cap + tol) out.push_back({k, "symmetry_bound", info.sym_after, sym_cap});

  const double dist2 = info.dist * info.dist;
  const double dist_cap = 2.0 / (c.gamma - c.rho) * decrease;
  if (dist2 > dist_cap + tol) out.push_back({k, "distance_bound", dist2, dist_cap});

  if (info.ball_lhs > info.ball_rhs + tol) out.push_back({k, "ball", info.ball_lhs, info.ball_rhs});
}

void check_monotone(long k, double f_prev, double f_next, std::vector<LemmaViolation>& out) {
  if (f_next > f_prev + audit_tol(f_prev)) out.push_back({k, "monotone", f_next, f_prev});
}

}  // namespace mcm
