#include "mcm/steps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

namespace mcm {
namespace {

constexpr int kMaxHalvings = 30;
constexpr int kMaxSecularIterations = 200;
constexpr int kMaxFallbackBacktracks = 60;

// The per-column objective, evaluated either through the separable quadratic
// form or through the full model with column i replaced.
class ColumnObjective {
 public:
  ColumnObjective(const ObjectiveModel& model, const Mat& w, Index i,
                  std::optional<ColumnQuadratic> quad)
      : model_(model), w_(w), i_(i), quad_(std::move(quad)) {}

  double value(const Vec& x) const {
    if (quad_) return 0.5 * quad_->weight * x.dot(*quad_->hessian * x) + quad_->linear.dot(x);
    Mat trial = w_;
    trial.col(i_) = x;
    return model_.value(trial);
  }

  Vec gradient(const Vec& x) const {
    if (quad_) return quad_->weight * (*quad_->hessian * x) + quad_->linear;
    Mat trial = w_;
    trial.col(i_) = x;
    return model_.gradient(trial).col(i_);
  }

  const std::optional<ColumnQuadratic>& quad() const { return quad_; }

 private:
  const ObjectiveModel& model_;
  const Mat& w_;
  Index i_;
  std::optional<ColumnQuadratic> quad_;
};

// Algorithm 1 acceptance test for replacing column x_i by x_plus.
bool accept_column(const ColumnObjective& obj, const Mat& w, Index i, const Vec& x_plus,
                   const StepConfig& cfg) {
  const Vec xi = w.col(i);
  const double decrease = obj.value(xi) - obj.value(x_plus);
  const double dist = (xi - x_plus).norm();
  const Vec g = obj.gradient(xi);
  const double proj_grad = (g - w * (w.transpose() * g)).norm();
  return decrease >= cfg.cbcd_k1 * dist * dist && dist >= cfg.cbcd_k2 * proj_grad;
}

Vec exact_column(const Mat& w, Index i, const ColumnQuadratic& quad) {
  const Index n = w.rows();
  const Index p = w.cols();
  const Vec xi = w.col(i);
  if (p == 1) {
    const Mat h = quad.weight * *quad.hessian;
    return cbcd_column_exact(h, quad.linear, &xi).z;
  }

  Mat others(n, p - 1);
  for (Index j = 0, c = 0; j < p; ++j)
    if (j != i) others.col(c++) = w.col(j);

  // Trailing n - p + 1 columns of the full Q span the complement of the other columns.
  Eigen::HouseholderQR<Mat> qr(others);
  const auto q = qr.householderQ();
  const Index m = n - p + 1;
  Mat t = *quad.hessian;
  t.applyOnTheLeft(q.adjoint());
  t.applyOnTheRight(q);
  const Mat h = quad.weight * t.bottomRightCorner(m, m);
  Vec bt = quad.linear;
  bt.applyOnTheLeft(q.adjoint());
  Vec ref = xi;
  ref.applyOnTheLeft(q.adjoint());

  const Vec ref_tail = ref.tail(m);
  const SphereQuadraticSolution sol = cbcd_column_exact(h, bt.tail(m), &ref_tail);
  Vec full = Vec::Zero(n);
  full.tail(m) = sol.z;
  full.applyOnTheLeft(q);
  return full;
}

Vec fallback_column(const ColumnObjective& obj, const Mat& w, Index i, const StepConfig& cfg,
                    double scale) {
  const Vec xi = w.col(i);
  const Vec g = obj.gradient(xi);
  const Vec d = g - w * (w.transpose() * g);
  if (d.norm() == 0.0) return xi;
  double t = 1.0 / std::max(scale, std::numeric_limits<double>::min());
  for (int it = 0; it < kMaxFallbackBacktracks; ++it, t *= 0.5) {
    // d is orthogonal to every column of w, so the trial stays orthogonal to the others.
    const Vec trial = (xi - t * d).normalized();
    if (accept_column(obj, w, i, trial, cfg)) return trial;
  }
  return xi;
}

}  // namespace

void StepConfig::validate() const {
  if (!(tau_min > 0.0) || !(tau_min <= tau_max))
    throw Error("StepConfig: need 0 < tau_min <= tau_max");
  if (!(cbcd_k1 > 0.0) || !(cbcd_k2 > 0.0)) throw Error("StepConfig: k1, k2 must be positive");
  if (tau_policy.kind == TauPolicy::Kind::Fixed && !(tau_policy.value > 0.0))
    throw Error("StepConfig: fixed tau must be positive");
}

StiefelPoint step_gr(const StiefelPoint& x, const Mat& g, double tau) {
  const Mat& xv = x.value();
  if (g.rows() != xv.rows() || g.cols() != xv.cols())
    throw DimensionMismatch("step_gr: gradient shape mismatch");
  const Mat v = xv - tau * g;
  const Mat vtv = v.transpose() * v;
  const Mat vtx = v.transpose() * xv;

  // (V^T V)^+ through its eigendecomposition; V^T V is symmetric positive semidefinite.
  Eigen::SelfAdjointEigenSolver<Mat> es(vtv);
  const Vec& lam = es.eigenvalues();
  const double cutoff = kRankTol * std::max(lam.cwiseAbs().maxCoeff(), 0.0);
  Vec inv(lam.size());
  for (Index j = 0; j < lam.size(); ++j) inv(j) = lam(j) > cutoff ? 1.0 / lam(j) : 0.0;
  const Mat& u = es.eigenvectors();
  const Mat pinv_vtx = u * (inv.asDiagonal() * (u.transpose() * vtx));

  Mat out = -xv + 2.0 * v * pinv_vtx;
  if (feasibility_violation(out) > kFeasTol) {
    spdlog::debug("step_gr: feasibility {:.3e} above tolerance, re-orthonormalizing",
                  feasibility_violation(out));
  }
  return restore_feasibility(std::move(out));
}

StiefelPoint step_gp(const StiefelPoint& x, const Mat& g, double tau) {
  const Mat& xv = x.value();
  if (g.rows() != xv.rows() || g.cols() != xv.cols())
    throw DimensionMismatch("step_gp: gradient shape mismatch");
  return project_stiefel_polar(xv - tau * g);
}

SphereQuadraticSolution cbcd_column_exact(const Mat& h, const Vec& b, const Vec* reference) {
  const Index m = h.rows();
  if (h.cols() != m || b.size() != m) throw DimensionMismatch("cbcd_column_exact: shape mismatch");

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (h + h.transpose()));
  if (es.info() != Eigen::Success) throw SubproblemFailed("cbcd_column_exact: eigensolver failed");
  const Vec& lam = es.eigenvalues();
  const Mat& v = es.eigenvectors();
  const Vec bh = v.transpose() * b;
  const double bnorm = b.norm();
  const double lam_min = lam(0);
  const double size = std::max({1.0, lam.cwiseAbs().maxCoeff(), bnorm});

  auto finish = [&](Vec z, double mu, bool hard) {
    z.normalize();
    SphereQuadraticSolution sol;
    sol.value = 0.5 * z.dot(h * z) + b.dot(z);
    sol.z = std::move(z);
    sol.multiplier = mu;
    sol.hard_case = hard;
    return sol;
  };
  // Picks the sign of a free direction so the result stays close to the reference.
  auto signed_dir = [&](const Vec& dir) {
    return (reference != nullptr && reference->dot(dir) < 0.0) ? Vec(-dir) : dir;
  };

  if (bnorm <= 1e-14 * size) return finish(signed_dir(v.col(0)), -lam_min, false);

  Index bottom = 0;
  while (bottom < m && lam(bottom) - lam_min <= 1e-12 * size) ++bottom;
  const double b_bottom = bh.head(bottom).norm();

  if (b_bottom <= 1e-12 * bnorm) {
    Vec zt = Vec::Zero(m);
    for (Index j = bottom; j < m; ++j) zt -= bh(j) / (lam(j) - lam_min) * v.col(j);
    const double ztn = zt.norm();
    if (ztn <= 1.0) {
      const double t = std::sqrt(std::max(0.0, 1.0 - ztn * ztn));
      Vec z = zt + t * v.col(0);
      if (reference != nullptr) {
        Vec alt = zt - t * v.col(0);
        if ((alt - *reference).norm() < (z - *reference).norm()) z = std::move(alt);
      }
      return finish(std::move(z), -lam_min, true);
    }
  }

  // Secular equation ||z(mu)|| = 1 on (-lam_min, -lam_min + ||b||], solved as
  // psi(mu) = 1/||z(mu)|| - 1 = 0 by Newton with a bisection safeguard.
  auto norms = [&](double mu, double& nz, double& d3) {
    double s2 = 0.0;
    double s3 = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (bh(j) == 0.0) continue;
      const double den = lam(j) + mu;
      const double r = bh(j) / den;
      s2 += r * r;
      s3 += r * r / den;
    }
    nz = std::sqrt(s2);
    d3 = s3;
  };

  double lo = -lam_min;
  double hi = -lam_min + bnorm;
  double mu = hi;
  bool converged = false;
  for (int it = 0; it < kMaxSecularIterations; ++it) {
    double nz = 0.0;
    double s3 = 0.0;
    norms(mu, nz, s3);
    if (std::abs(nz - 1.0) <= 1e-14) {
      converged = true;
      break;
    }
    const double psi = 1.0 / nz - 1.0;
    if (psi < 0.0) {
      lo = mu;
    } else {
      hi = mu;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mu))) {
      converged = true;
      break;
    }
    const double dpsi = s3 / (nz * nz * nz);
    double next = mu - psi / dpsi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
  }
  if (!converged) {
    std::ostringstream os;
    os << "cbcd_column_exact: secular iteration stalled after " << kMaxSecularIterations
       << " steps";
    throw SubproblemFailed(os.str());
  }

  Vec z = Vec::Zero(m);
  for (Index j = 0; j < m; ++j)
    if (bh(j) != 0.0) z -= bh(j) / (lam(j) + mu) * v.col(j);
  return finish(std::move(z), mu, false);
}

StiefelPoint step_cbcd(const StiefelPoint& x, const ObjectiveModel& model,
                       const StepConfig& cfg) {
  Mat w = x.value();
  const Index p = w.cols();
  for (Index i = 0; i < p; ++i) {
    std::optional<ColumnQuadratic> quad =
        cfg.cbcd_mode == CbcdMode::ExactTRS ? model.column_quadratic(w, i) : std::nullopt;
    const ColumnObjective obj(model, w, i, quad);

    Vec x_plus;
    bool have = false;
    if (quad) {
      try {
        x_plus = exact_column(w, i, *quad);
        have = true;
      } catch (const SubproblemFailed& e) {
        spdlog::debug("step_cbcd: column {} exact solve failed ({}), using fallback", i, e.what());
      }
    }
    if (!have) x_plus = fallback_column(obj, w, i, cfg, model.scale());

    if (accept_column(obj, w, i, x_plus, cfg)) w.col(i) = x_plus;
  }
  return restore_feasibility(std::move(w));
}

ReductionResult reduction_step(const StiefelPoint& x, const Mat& g, const ObjectiveModel& model,
                               const StepConfig& cfg, double tau) {
  switch (cfg.kind) {
    case StepKind::GR:
      return {step_gr(x, g, tau), tau};
    case StepKind::CBCD:
      return {step_cbcd(x, model, cfg), tau};
    case StepKind::GP:
      break;
  }
  for (int halvings = 0; halvings <= kMaxHalvings; ++halvings, tau *= 0.5) {
    try {
      return {step_gp(x, g, tau), tau};
    } catch (const RankDeficient&) {
      spdlog::debug("step_gp: X - tau G rank deficient at tau = {:.3e}, halving", tau);
    }
  }
  throw StepFailed("gradient projection stayed rank deficient after 30 stepsize halvings");
}

double bb_tau(BBState& state, const Mat& x, const Mat& c, long k, const StepConfig& cfg,
              double scale) {
  double tau = 0.0;
  if (!state.prev_x || !state.prev_c) {
    tau = 1.0 / scale;
  } else {
    const Mat j = x - *state.prev_x;
    const Mat kk = c - *state.prev_c;
    const double jk = std::abs(inner(j, kk));
    if (k % 2 != 0) {
      const double den = inner(kk, kk);
      tau = den < 1e-20 ? state.tau : jk / den;
    } else {
      tau = jk < 1e-20 ? state.tau : inner(j, j) / jk;
    }
  }
  tau = std::clamp(tau, cfg.tau_min / scale, cfg.tau_max / scale);
  state.prev_x = x;
  state.prev_c = c;
  state.tau = tau;
  state.k = k;
  return tau;
}

}  // namespace mcm
