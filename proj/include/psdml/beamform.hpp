#pragma once

// Projections and beamformers that appear inside the closed-form estimators.
// Every application of the inverse coherence is a solve against a Cholesky
// factor; no explicit inverse is formed.

#include "psdml/model.hpp"
#include "psdml/types.hpp"

namespace psdml {

inline constexpr double kDegenerateRcond = 1e-12;
inline constexpr double kIllConditionedRcond = 1e-8;

/// Cholesky-factored Hermitian positive-definite matrix (typically the
/// diffuse coherence, or its blocked counterpart B^H G B).
class FactoredHermitian {
 public:
  FactoredHermitian() = default;
  explicit FactoredHermitian(const CMatrix& m);

  const CMatrix& matrix() const { return matrix_; }
  int size() const { return static_cast<int>(matrix_.rows()); }
  /// M^{-1} x
  CMatrix solve(const CMatrix& x) const;

 private:
  CMatrix matrix_;
  Eigen::LLT<CMatrix> llt_;
};

/// [g | V], N x (T+1).
struct SpeechPlusNoiseBasis {
  CMatrix matrix;
};

struct ProjectionSet {
  CMatrix q;        // N x N, annihilates [g | V]
  CMatrix q_tilde;  // (N-1) x (N-1), annihilates B^H V
  CMatrix pg_perp;  // N x N
  CMatrix pv_perp;  // N x N
};

struct BeamformerSet {
  CVector w_s;        // speech MVDR, nulls V
  CMatrix w_u;        // N x T noise LCMV, nulls g
  CMatrix w_u_tilde;  // (N-1) x T noise LCMV after blocking
};

/// Reciprocal condition number of a Hermitian positive-(semi)definite Gram
/// matrix. Below kDegenerateRcond throws DegenerateGeometry; below
/// kIllConditionedRcond appends a warning.
double check_gram_conditioning(const CMatrix& gram, const char* what, Warnings* warnings);

/// Throws DegenerateGeometry if g lies (numerically) in span(V).
SpeechPlusNoiseBasis build_basis(const SteeringVector& g, const CMatrix& v);

/// I - A (A^H G^{-1} A)^{-1} A^H G^{-1}
CMatrix projection_q(const SpeechPlusNoiseBasis& a, const FactoredHermitian& gamma,
                     Warnings* warnings = nullptr);

/// I - G^{-1} g g^H / (g^H G^{-1} g)
CMatrix projection_pg_perp(const SteeringVector& g, const FactoredHermitian& gamma);

/// I - G^{-1} V (V^H G^{-1} V)^{-1} V^H
CMatrix projection_pv_perp(const CMatrix& v, const FactoredHermitian& gamma,
                           Warnings* warnings = nullptr);

/// Speech MVDR with nulls on the noise subspace: w^H g = 1, w^H V = 0.
CVector mvdr_speech(const SteeringVector& g, const CMatrix& v, const FactoredHermitian& gamma,
                    Warnings* warnings = nullptr);

/// Multi-source noise LCMV: W^H g = 0, W^H V = I.
CMatrix lcmv_noise(const SteeringVector& g, const CMatrix& v, const FactoredHermitian& gamma,
                   Warnings* warnings = nullptr);

/// Noise LCMV on the blocking-matrix output: W~^H (B^H V) = I.
CMatrix lcmv_noise_blocked(const BlockingMatrix& b, const CMatrix& v, const FactoredHermitian& gamma,
                           Warnings* warnings = nullptr);

/// I - V~ (V~^H (B^H G B)^{-1} V~)^{-1} V~^H (B^H G B)^{-1}, V~ = B^H V.
CMatrix projection_q_tilde(const BlockingMatrix& b, const CMatrix& v, const FactoredHermitian& gamma,
                           Warnings* warnings = nullptr);

/// Everything the estimators need for one frequency bin, computed once.
/// Immutable after construction and safe to share across threads.
struct SceneModel {
  int n_mics = 0;
  int rank = 0;  // T

  SteeringVector g;
  CMatrix v;  // N x T
  FactoredHermitian gamma;
  BlockingMatrix b;

  CMatrix q;            // N x N
  CMatrix gamma_inv_q;  // G^{-1} Q, Hermitian
  CVector w_s;
  CMatrix w_u;
  double ws_gamma_ws = 0.0;  // w_s^H G w_s
  CMatrix wu_gamma_wu;       // W_u^H G W_u

  FactoredHermitian gamma_blocked;  // B^H G B
  CMatrix v_tilde;                  // B^H V
  CMatrix w_u_tilde;
  CMatrix q_tilde;
  CMatrix gamma_blocked_inv_q_tilde;  // (B^H G B)^{-1} Q~, Hermitian
  CMatrix wut_gamma_wut;              // W~^H (B^H G B) W~

  Warnings warnings;

  /// Builds the full per-bin cache. `blocking` defaults to blocking_matrix(g).
  static SceneModel build(const SteeringVector& g, const CMatrix& v, const CMatrix& gamma,
                          const BlockingMatrix* blocking = nullptr);

  /// Population covariance phi_S g g^H + phi_R G + V Psi V^H.
  CMatrix population_covariance(double phi_s, double phi_r, const CMatrix& psi_v) const;
};

}  // namespace psdml
