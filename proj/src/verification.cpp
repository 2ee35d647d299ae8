#include "mcm/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mcm/rng.hpp"

namespace mcm {
namespace {

// Depth-first enumeration of injective maps {0..p-1} -> {0..n-1}.
void enumerate(const Vec& lam, const Vec& d, Index i, std::vector<bool>& used, double partial,
               double& best) {
  if (i == d.size()) {
    best = std::min(best, partial);
    return;
  }
  for (Index j = 0; j < lam.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    enumerate(lam, d, i + 1, used, partial + d(i) * lam(j), best);
    used[j] = false;
  }
}

// Projected-gradient polish with Armijo backtracking on a QR retraction; kept
// separate from the solver so the bound does not share its code path.
Mat polish(const ObjectiveModel& model, Mat x) {
  const double t0 = 1.0 / std::max(model.scale(), 1e-300);
  double f = model.value(x);
  for (int it = 0; it < 2000; ++it) {
    const Mat g = model.gradient(x);
    const Mat s = x.transpose() * g;
    const Mat xi = g - x * (0.5 * (s + s.transpose()));
    const double xi2 = xi.squaredNorm();
    if (std::sqrt(xi2) <= 1e-11 * (1.0 + g.norm())) break;
    double t = t0;
    bool moved = false;
    for (int bt = 0; bt < 50; ++bt, t *= 0.5) {
      Mat trial = orthonormalize_qr(x - t * xi).value();
      const double ft = model.value(trial);
      if (ft <= f - 1e-4 * t * xi2) {
        x = std::move(trial);
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace

Mat fd_gradient(const ObjectiveModel& model, const Mat& x, double h) {
  if (h <= 0.0) h = 1e-6 * (1.0 + x.norm());
  Mat g(x.rows(), x.cols());
  Mat probe = x;
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double keep = probe(i, j);
      probe(i, j) = keep + h;
      const double up = model.value(probe);
      probe(i, j) = keep - h;
      const double down = model.value(probe);
      probe(i, j) = keep;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

FiniteDifferenceModel::FiniteDifferenceModel(Index rows, Index cols, ValueFn value, double rho,
                                             double scale, double h)
    : rows_(rows), cols_(cols), value_(std::move(value)), rho_(rho), scale_(scale), h_(h) {
  if (!value_) throw Error("FiniteDifferenceModel: empty value function");
}

OracleResult eigen_oracle_quadratic(const Mat& m, Index p) {
  if (m.rows() != m.cols() || p < 1 || p > m.rows())
    throw DimensionMismatch("eigen_oracle_quadratic: need square M and 1 <= p <= n");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  OracleResult r;
  r.f_lb = 0.5 * es.eigenvalues().head(p).sum();
  r.kind = OracleResult::Kind::EigenExact;
  r.derivation = "trace minimization: half the sum of the p smallest eigenvalues";
  return r;
}

OracleResult brockett_oracle(const Vec& eigvals, const Vec& d) {
  const Index n = eigvals.size();
  const Index p = d.size();
  if (p < 1 || p > n) throw DimensionMismatch("brockett_oracle: need 1 <= p <= n");
  if (n > kBrockettEnumMaxN || p > kBrockettEnumMaxP) {
    std::ostringstream os;
    os << "brockett_oracle: enumeration capped at n <= " << kBrockettEnumMaxN
       << ", p <= " << kBrockettEnumMaxP << " (got n = " << n << ", p = " << p << ")";
    throw InstanceTooLarge(os.str());
  }
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  double best = std::numeric_limits<double>::infinity();
  enumerate(eigvals, d, 0, used, 0.0, best);
  OracleResult r;
  r.f_lb = 0.5 * best;
  r.kind = OracleResult::Kind::BrockettExact;
  r.derivation = "exhaustive assignment of eigenvalues to the entries of d";
  return r;
}

double brockett_closed_form(const Vec& eigvals, const Vec& d) {
  const Index p = d.size();
  if (p < 1 || p > eigvals.size()) throw DimensionMismatch("brockett_closed_form: need 1 <= p <= n");
  for (Index i = 0; i < p; ++i) {
    if (!(d(i) > 0.0) || (i > 0 && !(d(i) < d(i - 1))))
      throw Error("brockett_closed_form: d must be positive and strictly descending");
  }
  std::vector<double> lam(eigvals.data(), eigvals.data() + eigvals.size());
  std::sort(lam.begin(), lam.end());
  double s = 0.0;
  for (Index i = 0; i < p; ++i) s += d(i) * lam[static_cast<std::size_t>(i)];
  return 0.5 * s;
}

OracleResult sampled_bound(const ObjectiveModel& model, int starts, std::uint64_t seed) {
  if (starts < 1) throw Error("sampled_bound: need at least one start");
  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts; ++s) {
    const Mat x0 = orthonormalize_qr(rng.gaussian_matrix(model.rows(), model.cols())).value();
    best = std::min(best, model.value(polish(model, x0)));
  }
  OracleResult r;
  r.f_lb = best;
  r.kind = OracleResult::Kind::SampledBound;
  r.derivation = "best of polished random starts (not certified)";
  return r;
}

std::vector<LemmaViolation> audit_lemmas(const SolveReport& report, const ObjectiveModel& model) {
  if (!(report.gamma > report.rho)) {
    std::ostringstream os;
    os << "audit_lemmas: the inequalities need gamma > rho (gamma = " << report.gamma
       << ", rho = " << report.rho << ")";
    throw Error(os.str());
  }
  double m = std::max(model.gradient_norm_bound().value_or(0.0), report.grad_norm2_0);
  for (const IterRecord& r : report.trace) {
    m = std::max(m, r.grad_norm2);
    for (const CorrectionInfo& c : r.correction_log) m = std::max(m, c.grad_norm2);
  }
  const LemmaConstants consts{report.rho, report.gamma, m};

  std::vector<LemmaViolation> out;
  double f_prev = report.f0;
  for (const IterRecord& r : report.trace) {
    for (const CorrectionInfo& c : r.correction_log) check_correction(c, r.k, consts, out);
    check_monotone(r.k, f_prev, r.f, out);
    f_prev = r.f;
  }
  return out;
}

ComplexityCheck check_complexity(const SolveReport& report, double f_lb) {
  ComplexityCheck res;
  const double gamma = report.gamma;
  const double rho = report.rho;
  if (!(gamma > rho)) throw Error("check_complexity: needs gamma > rho");

  double c1 = std::numeric_limits<double>::infinity();
  double f_prev = report.f0;
  double sub_prev = report.substat0;
  for (const IterRecord& r : report.trace) {
    const double decrease = f_prev - r.f_bar;
    const double noise = 1e-14 * (1.0 + std::abs(f_prev));
    if (sub_prev > 0.0 && decrease > noise) {
      c1 = std::min(c1, decrease / (sub_prev * sub_prev));
      ++res.steps_used;
    } else if (decrease < -noise) {
      res.violations.push_back({r.k, "complexity", decrease, 0.0});
    }
    f_prev = r.f;
    sub_prev = r.substat;
  }
  if (res.steps_used == 0) return res;
  res.c1 = c1;
  res.c2 = 1.0 / c1 + 8.0 * (gamma + rho) * (gamma + rho) / (gamma - rho);

  const double gap = std::max(0.0, report.f0 - f_lb);
  double best = std::numeric_limits<double>::infinity();
  for (const IterRecord& r : report.trace) {
    best = std::min(best, r.kkt);
    const double bound = std::sqrt(res.c2 * gap / static_cast<double>(r.k));
    if (best > bound * (1.0 + kAuditRelTol) + kAuditRelTol)
      res.violations.push_back({r.k, "complexity", best, bound});
  }
  return res;
}

}  // namespace mcm
