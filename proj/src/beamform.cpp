#include "psdml/beamform.hpp"

#include <cmath>
#include <sstream>

namespace psdml {

FactoredHermitian::FactoredHermitian(const CMatrix& m) : matrix_(hermitian_part(m)), llt_(matrix_) {
  if (m.rows() != m.cols()) throw InvalidArgument("FactoredHermitian: matrix must be square");
  if (llt_.info() != Eigen::Success) {
    throw NumericError("FactoredHermitian: matrix is not positive definite");
  }
}

CMatrix FactoredHermitian::solve(const CMatrix& x) const {
  if (x.rows() != matrix_.rows()) throw InvalidArgument("FactoredHermitian::solve: shape mismatch");
  return llt_.solve(x);
}

double check_gram_conditioning(const CMatrix& gram, const char* what, Warnings* warnings) {
  if (gram.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> evd(hermitian_part(gram), Eigen::EigenvaluesOnly);
  const RVector& ev = evd.eigenvalues();
  const double hi = ev.cwiseAbs().maxCoeff();
  const double rcond = hi > 0.0 ? ev.minCoeff() / hi : 0.0;
  if (!(rcond >= kDegenerateRcond)) {
    std::ostringstream msg;
    msg << what << ": degenerate geometry (reciprocal condition " << rcond << ")";
    throw DegenerateGeometry(msg.str());
  }
  if (rcond < kIllConditionedRcond && warnings != nullptr) {
    std::ostringstream msg;
    msg << what << ": ill-conditioned (reciprocal condition " << rcond << ")";
    warnings->push_back(msg.str());
  }
  return rcond;
}

SpeechPlusNoiseBasis build_basis(const SteeringVector& g, const CMatrix& v) {
  const auto n = g.entries.size();
  if (v.rows() != n && v.cols() != 0) throw InvalidArgument("build_basis: V has wrong row count");
  if (v.cols() > n - 2) throw InvalidArgument("build_basis: rank must not exceed N-2");
  if (g.entries.norm() == 0.0) throw InvalidArgument("build_basis: g must be nonzero");
  SpeechPlusNoiseBasis a{CMatrix(n, v.cols() + 1)};
  a.matrix.col(0) = g.entries;
  if (v.cols() > 0) {
    a.matrix.rightCols(v.cols()) = v;
    // Residual of g after least-squares projection onto span(V).
    const CVector coeff = v.colPivHouseholderQr().solve(g.entries);
    const double residual = (g.entries - v * coeff).norm() / g.entries.norm();
    if (residual < 1e-10) {
      throw DegenerateGeometry("build_basis: speaker steering vector lies in the noise subspace");
    }
  }
  return a;
}

CMatrix projection_q(const SpeechPlusNoiseBasis& a, const FactoredHermitian& gamma, Warnings* warnings) {
  const auto n = a.matrix.rows();
  const CMatrix y = gamma.solve(a.matrix);  // G^{-1} A
  const CMatrix gram = a.matrix.adjoint() * y;
  check_gram_conditioning(gram, "A^H G^-1 A", warnings);
  // A (A^H G^{-1} A)^{-1} (G^{-1} A)^H
  return CMatrix::Identity(n, n) - a.matrix * gram.ldlt().solve(y.adjoint());
}

CMatrix projection_pg_perp(const SteeringVector& g, const FactoredHermitian& gamma) {
  const auto n = g.entries.size();
  const CVector gi = gamma.solve(g.entries);
  const double denom = g.entries.dot(gi).real();
  if (!(denom > 0.0)) throw DegenerateGeometry("P_g: g^H G^-1 g is not positive");
  return CMatrix::Identity(n, n) - gi * g.entries.adjoint() / denom;
}

CMatrix projection_pv_perp(const CMatrix& v, const FactoredHermitian& gamma, Warnings* warnings) {
  const auto n = gamma.size();
  if (v.cols() == 0) return CMatrix::Identity(n, n);
  const CMatrix vi = gamma.solve(v);
  const CMatrix gram = v.adjoint() * vi;
  check_gram_conditioning(gram, "V^H G^-1 V", warnings);
  return CMatrix::Identity(n, n) - vi * gram.ldlt().solve(v.adjoint());
}

CVector mvdr_speech(const SteeringVector& g, const CMatrix& v, const FactoredHermitian& gamma,
                    Warnings* warnings) {
  // w^H = g^H P G^{-1} / (g^H P G^{-1} g)  =>  w = G^{-1} P^H g / conj(den), with
  // G^{-1} P^H g = G^{-1} g - G^{-1} V (V^H G^{-1} V)^{-1} V^H G^{-1} g.
  CVector u = gamma.solve(g.entries);
  if (v.cols() > 0) {
    const CMatrix vi = gamma.solve(v);
    const CMatrix gram = v.adjoint() * vi;
    check_gram_conditioning(gram, "V^H G^-1 V", warnings);
    u -= vi * gram.ldlt().solve(CVector(vi.adjoint() * g.entries));
  }
  const cdouble den = g.entries.dot(u);  // = g^H P G^{-1} g, conjugated
  if (!(std::abs(den) > 0.0)) throw DegenerateGeometry("mvdr_speech: zero denominator");
  const double scale = g.entries.squaredNorm();
  if (std::abs(den) * scale < 1e-14 * gamma.solve(g.entries).norm() * scale) {
    throw DegenerateGeometry("mvdr_speech: speaker is not separable from the noise subspace");
  }
  return u / den;
}

CMatrix lcmv_noise(const SteeringVector& g, const CMatrix& v, const FactoredHermitian& gamma,
                   Warnings* warnings) {
  const auto n = g.entries.size();
  if (v.cols() == 0) return CMatrix(n, 0);
  const CMatrix pg = projection_pg_perp(g, gamma);
  const CMatrix x = gamma.solve(pg.adjoint() * v);  // (V^H P_g G^{-1})^H
  const CMatrix gram = v.adjoint() * x;             // = (V^H P_g G^{-1} V)^H
  check_gram_conditioning(gram, "V^H P_g G^-1 V", warnings);
  // W^H = M^{-1} X^H with M = V^H P_g G^{-1} V = gram^H
  return gram.adjoint().partialPivLu().solve(x.adjoint()).adjoint();
}

namespace {

struct BlockedParts {
  FactoredHermitian gz;  // B^H G B
  CMatrix v_tilde;
  CMatrix gz_inv_v;  // (B^H G B)^{-1} V~
  CMatrix gram;      // V~^H (B^H G B)^{-1} V~
};

BlockedParts blocked_parts(const BlockingMatrix& b, const CMatrix& v, const FactoredHermitian& gamma,
                           Warnings* warnings) {
  if (b.entries.rows() != gamma.size()) throw InvalidArgument("blocking matrix has wrong row count");
  BlockedParts p{FactoredHermitian(b.entries.adjoint() * gamma.matrix() * b.entries), CMatrix(), CMatrix(),
                 CMatrix()};
  p.v_tilde = b.entries.adjoint() * v;
  p.gz_inv_v = p.gz.solve(p.v_tilde);
  p.gram = p.v_tilde.adjoint() * p.gz_inv_v;
  if (v.cols() > 0) check_gram_conditioning(p.gram, "V~^H (B^H G B)^-1 V~", warnings);
  return p;
}

}  // namespace

CMatrix lcmv_noise_blocked(const BlockingMatrix& b, const CMatrix& v, const FactoredHermitian& gamma,
                           Warnings* warnings) {
  const auto m = b.entries.cols();
  if (v.cols() == 0) return CMatrix(m, 0);
  const BlockedParts p = blocked_parts(b, v, gamma, warnings);
  // W~ = (B^H G B)^{-1} V~ (V~^H (B^H G B)^{-1} V~)^{-1}, the Gram matrix is Hermitian.
  return p.gram.ldlt().solve(p.gz_inv_v.adjoint()).adjoint();
}

CMatrix projection_q_tilde(const BlockingMatrix& b, const CMatrix& v, const FactoredHermitian& gamma,
                           Warnings* warnings) {
  const auto m = b.entries.cols();
  if (v.cols() == 0) return CMatrix::Identity(m, m);
  const BlockedParts p = blocked_parts(b, v, gamma, warnings);
  return CMatrix::Identity(m, m) - p.v_tilde * p.gram.ldlt().solve(p.gz_inv_v.adjoint());
}

SceneModel SceneModel::build(const SteeringVector& g, const CMatrix& v, const CMatrix& gamma,
                             const BlockingMatrix* blocking) {
  SceneModel s;
  s.n_mics = g.size();
  s.rank = static_cast<int>(v.cols());
  if (gamma.rows() != s.n_mics || gamma.cols() != s.n_mics) {
    throw InvalidArgument("SceneModel: coherence matrix has wrong shape");
  }
  if (s.n_mics < 3) throw InvalidArgument("SceneModel: need at least 3 microphones");
  s.g = g;
  s.v = v.cols() == 0 ? CMatrix(s.n_mics, 0) : v;
  s.gamma = FactoredHermitian(gamma);
  s.b = blocking != nullptr ? *blocking : blocking_matrix(g);

  const SpeechPlusNoiseBasis a = build_basis(g, s.v);
  s.q = projection_q(a, s.gamma, &s.warnings);
  s.gamma_inv_q = hermitian_part(s.gamma.solve(s.q));
  s.w_s = mvdr_speech(g, s.v, s.gamma, &s.warnings);
  s.w_u = lcmv_noise(g, s.v, s.gamma, &s.warnings);
  s.ws_gamma_ws = s.w_s.dot(s.gamma.matrix() * s.w_s).real();
  s.wu_gamma_wu = hermitian_part(s.w_u.adjoint() * s.gamma.matrix() * s.w_u);

  s.gamma_blocked = FactoredHermitian(s.b.entries.adjoint() * s.gamma.matrix() * s.b.entries);
  s.v_tilde = s.b.entries.adjoint() * s.v;
  s.w_u_tilde = lcmv_noise_blocked(s.b, s.v, s.gamma, &s.warnings);
  s.q_tilde = projection_q_tilde(s.b, s.v, s.gamma, nullptr);
  s.gamma_blocked_inv_q_tilde = hermitian_part(s.gamma_blocked.solve(s.q_tilde));
  s.wut_gamma_wut = hermitian_part(s.w_u_tilde.adjoint() * s.gamma_blocked.matrix() * s.w_u_tilde);
  return s;
}

CMatrix SceneModel::population_covariance(double phi_s, double phi_r, const CMatrix& psi_v) const {
  if (psi_v.rows() != rank || psi_v.cols() != rank) {
    throw InvalidArgument("population_covariance: Psi_v must be T x T");
  }
  CMatrix phi = phi_s * g.entries * g.entries.adjoint() + phi_r * gamma.matrix();
  if (rank > 0) phi += v * psi_v * v.adjoint();
  return hermitian_part(phi);
}

}  // namespace psdml
