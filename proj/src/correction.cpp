#include "mcm/correction.hpp"

#include <cmath>
#include <sstream>

namespace mcm {
namespace {

Mat rotation_argument(const StiefelPoint& x_bar, const Mat& g, double gamma) {
  const Mat& x = x_bar.value();
  if (g.rows() != x.rows() || g.cols() != x.cols())
    throw DimensionMismatch("correction: gradient shape mismatch");
  Mat z = x.transpose() * g;
  z.diagonal().array() -= gamma;
  return z;
}

}  // namespace

void CorrectionConfig::validate() const {
  if (!(gamma > 0.0)) throw Error("CorrectionConfig: gamma must be positive");
  if (schedule.kind == CorrectionSchedule::Kind::Fixed && schedule.count < 1)
    throw Error("CorrectionConfig: fixed correction count must be >= 1");
}

std::pair<StiefelPoint, CorrectionInfo> correct_once(const StiefelPoint& x_bar, const Mat& g,
                                                     const CorrectionConfig& cfg) {
  CorrectionInfo info;
  const Mat z = rotation_argument(x_bar, g, cfg.gamma);
  info.sym_before = symmetry_violation(x_bar, g);
  info.grad_norm2 = spectral_norm(g);
  info.ball_rhs = g.norm() / cfg.gamma;
  info.ball_lhs = info.ball_rhs;
  if (z.norm() <= cfg.zero_tol()) return {x_bar, info};

  Eigen::JacobiSVD<Mat> svd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat& u = svd.matrixU();
  const Mat& v = svd.matrixV();
  const Vec& sigma = svd.singularValues();
  const Mat q = -u * v.transpose();

  const Mat& xb = x_bar.value();
  Mat out = xb * q;
  info.applied = true;
  info.sigma_trace = sigma.sum();
  info.model_decrease = info.sigma_trace + (u * sigma.asDiagonal() * v.transpose()).trace();
  info.dist = (out - xb).norm();
  info.ball_lhs = (out - xb + g / cfg.gamma).norm();
  return {restore_feasibility(std::move(out)), info};
}

long delta_schedule(long k) {
  if (k < 1) throw Error("delta_schedule: k must be >= 1");
  // smallest c with 4 c^2 >= k, i.e. c = ceil(sqrt(k) / 2)
  long c = static_cast<long>(std::sqrt(static_cast<double>(k))) / 2;
  while (4 * c * c < k) ++c;
  while (c > 0 && 4 * (c - 1) * (c - 1) >= k) --c;
  return 2 * c - 1;
}

long corrections_for(const CorrectionSchedule& schedule, long k) {
  return schedule.kind == CorrectionSchedule::Kind::Fixed ? schedule.count : delta_schedule(k);
}

SweepResult correction_sweep(const StiefelPoint& x_bar, const ObjectiveModel& model,
                             const CorrectionConfig& cfg, long k) {
  const long m = corrections_for(cfg.schedule, k);
  SweepResult res{x_bar, {}, model.gradient(x_bar.value()), model.value(x_bar.value())};
  for (long r = 0; r < m; ++r) {
    auto [next, info] = correct_once(res.x, res.gradient, cfg);
    info.f_before = res.f;
    if (!info.applied) {
      info.sym_after = info.sym_before;
      info.f_after = res.f;
      res.infos.push_back(info);
      break;
    }
    Mat g_next = model.gradient(next.value());
    info.f_after = model.value(next.value());
    info.sym_after = symmetry_violation(next, g_next);
    res.f = info.f_after;
    res.x = std::move(next);
    res.gradient = std::move(g_next);
    res.infos.push_back(info);
  }
  return res;
}

double rotation_optimality_gap(const StiefelPoint& x_bar, const Mat& g, double gamma,
                               const Mat& q_test) {
  const Mat z = rotation_argument(x_bar, g, gamma);
  if (q_test.rows() != z.rows() || q_test.cols() != z.cols())
    throw DimensionMismatch("rotation_optimality_gap: Q must be p x p");
  const double orth = (q_test.transpose() * q_test - Mat::Identity(z.rows(), z.cols())).norm();
  if (orth > 1e-12) {
    std::ostringstream os;
    os << "rotation_optimality_gap: ||Q^T Q - I||_F = " << orth;
    throw NotOrthogonal(os.str());
  }
  Eigen::JacobiSVD<Mat> svd(z);
  return (q_test.transpose() * z).trace() + svd.singularValues().sum();
}

}  // namespace mcm
