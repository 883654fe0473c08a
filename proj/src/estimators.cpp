#include "psdml/estimators.hpp"

#include <algorithm>

#include "psdml/kernels.hpp"

namespace psdml {

double power_floor(const CMatrix& r) {
  const double n = static_cast<double>(std::max<Eigen::Index>(r.rows(), 1));
  return 1e-12 * std::max(r.trace().real(), 0.0) / n;
}

CMatrix clip_psd(const CMatrix& psi) {
  if (psi.size() == 0) return psi;
  Eigen::SelfAdjointEigenSolver<CMatrix> evd(hermitian_part(psi));
  const RVector lam = evd.eigenvalues().cwiseMax(0.0);
  const CMatrix& u = evd.eigenvectors();
  return hermitian_part(u * lam.cast<cdouble>().asDiagonal() * u.adjoint());
}

SampleCovariance sample_cov(const std::vector<CVector>& snapshots) {
  if (snapshots.empty()) throw InvalidArgument("sample_cov: no snapshots");
  const auto n = snapshots.front().size();
  SampleCovariance out{CMatrix::Zero(n, n), static_cast<double>(snapshots.size())};
  for (const auto& y : snapshots) {
    if (y.size() != n) throw InvalidArgument("sample_cov: snapshot length mismatch");
    kernels::herm_rank1_update(out.matrix, y, 1.0, 1.0);
  }
  out.matrix /= out.effective_count;
  out.matrix = hermitian_part(out.matrix);
  return out;
}

SampleCovariance sample_cov(const CMatrix& snapshots) {
  if (snapshots.cols() == 0) throw InvalidArgument("sample_cov: no snapshots");
  const auto l = static_cast<double>(snapshots.cols());
  SampleCovariance out{CMatrix::Zero(snapshots.rows(), snapshots.rows()), l};
  for (Eigen::Index j = 0; j < snapshots.cols(); ++j) {
    kernels::herm_rank1_update(out.matrix, snapshots.col(j), 1.0, 1.0);
  }
  out.matrix /= l;
  out.matrix = hermitian_part(out.matrix);
  return out;
}

SampleCovariance recursive_cov(const SampleCovariance& previous, const CVector& y, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("recursive_cov: alpha must lie in [0, 1)");
  SampleCovariance out{previous.matrix, (1.0 + alpha) / (1.0 - alpha)};
  if (out.matrix.size() == 0) out.matrix = CMatrix::Zero(y.size(), y.size());
  if (out.matrix.rows() != y.size()) throw InvalidArgument("recursive_cov: shape mismatch");
  kernels::herm_rank1_update(out.matrix, y, alpha, 1.0 - alpha);
  return out;
}

namespace {

void check_cov(const CMatrix& r, int n, const char* who) {
  if (r.rows() != n || r.cols() != n) throw InvalidArgument(std::string(who) + ": covariance has wrong shape");
  if (!r.allFinite()) throw InvalidArgument(std::string(who) + ": non-finite covariance");
}

void apply_floors(PsdEstimates& e, const CMatrix& r) {
  const double floor = power_floor(r);
  e.phi_r = std::max(e.phi_r_raw, floor);
  e.phi_s = e.has_speech ? std::max(e.phi_s_raw, floor) : 0.0;
  e.psi_v = clip_psd(e.psi_v_raw);
}

}  // namespace

PsdEstimates mle_nonblocking(const CMatrix& r, const SceneModel& scene) {
  check_cov(r, scene.n_mics, "mle_nonblocking");
  const double dof = scene.n_mics - 1 - scene.rank;
  PsdEstimates e;
  // Tr[Q R G^-1] = Tr[R (G^-1 Q)], real for Hermitian R.
  e.phi_r_raw = kernels::re_trace_product(r, scene.gamma_inv_q) / dof;
  e.phi_s_raw = scene.w_s.dot(r * scene.w_s).real() - e.phi_r_raw * scene.ws_gamma_ws;
  e.psi_v_raw =
      hermitian_part(scene.w_u.adjoint() * r * scene.w_u - e.phi_r_raw * scene.wu_gamma_wu);
  apply_floors(e, r);
  return e;
}

PsdEstimates mle_nonblocking(const SampleCovariance& r, const SteeringVector& g, const CMatrix& v,
                             const CoherenceMatrix& gamma) {
  return mle_nonblocking(r.matrix, SceneModel::build(g, v, gamma.entries));
}

PsdEstimates mle_blocking(const CMatrix& r, const SceneModel& scene) {
  check_cov(r, scene.n_mics, "mle_blocking");
  const double dof = scene.n_mics - 1 - scene.rank;
  const CMatrix rz = hermitian_part(scene.b.entries.adjoint() * r * scene.b.entries);
  PsdEstimates e;
  e.has_speech = false;
  e.phi_r_raw = kernels::re_trace_product(rz, scene.gamma_blocked_inv_q_tilde) / dof;
  e.psi_v_raw = hermitian_part(scene.w_u_tilde.adjoint() * rz * scene.w_u_tilde -
                               e.phi_r_raw * scene.wut_gamma_wut);
  apply_floors(e, r);
  return e;
}

PsdEstimates mle_blocking(const SampleCovariance& r, const BlockingMatrix& b, const CMatrix& v,
                          const CoherenceMatrix& gamma) {
  // Only B enters the blocking estimator; g is recovered as the null direction of B^H.
  const auto n = b.entries.rows();
  const CMatrix full = CMatrix::Identity(n, n) - b.entries * b.entries.adjoint();
  Eigen::Index idx = 0;
  full.diagonal().real().maxCoeff(&idx);
  CVector g = full.col(idx);
  g /= g(0);
  return mle_blocking(r.matrix, SceneModel::build(SteeringVector{g}, v, gamma.entries, &b));
}

double speech_psd_blocking(const CMatrix& r, const CVector& w, double phi_r, const CMatrix& psi_v,
                           const CMatrix& v, const CMatrix& gamma) {
  const auto n = w.size();
  if (r.rows() != n || r.cols() != n || gamma.rows() != n || gamma.cols() != n) {
    throw InvalidArgument("speech_psd_blocking: shape mismatch");
  }
  if (v.rows() != n && v.cols() != 0) throw InvalidArgument("speech_psd_blocking: V has wrong rows");
  if (psi_v.rows() != v.cols() || psi_v.cols() != v.cols()) {
    throw InvalidArgument("speech_psd_blocking: Psi_v must be T x T");
  }
  double out = w.dot(r * w).real() - phi_r * w.dot(gamma * w).real();
  if (v.cols() > 0) {
    const CVector vw = v.adjoint() * w;
    out -= vw.dot(psi_v * vw).real();
  }
  return out;
}

void complete_speech(PsdEstimates& est, const CMatrix& r, const CVector& w, const SceneModel& scene) {
  est.has_speech = true;
  est.phi_s_raw = speech_psd_blocking(r, w, est.phi_r_raw, est.psi_v_raw, scene.v, scene.gamma.matrix());
  est.phi_s = std::max(est.phi_s_raw, power_floor(r));
}

}  // namespace psdml
