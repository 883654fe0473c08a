#pragma once

// Closed-form ML estimators of the reverberation, speech and noise PSDs for
// one time-frequency cell.

#include <vector>

#include "psdml/beamform.hpp"
#include "psdml/types.hpp"

namespace psdml {

struct SampleCovariance {
  CMatrix matrix;
  double effective_count = 0.0;  // L, or (1+a)/(1-a) under recursive averaging
};

struct PsdEstimates {
  double phi_r = 0.0;
  double phi_s = 0.0;
  CMatrix psi_v;  // T x T, Hermitian PSD

  // Before flooring / eigenvalue clipping.
  double phi_r_raw = 0.0;
  double phi_s_raw = 0.0;
  CMatrix psi_v_raw;

  bool has_speech = true;  // false for the blocking estimator before the speech step
};

/// Floor used for phi_R and phi_S: 1e-12 * tr(R) / N.
double power_floor(const CMatrix& r);

/// Nearest Hermitian PSD matrix by clipping eigenvalues at zero.
CMatrix clip_psd(const CMatrix& psi);

/// (1/L) sum y y^H over the snapshots.
SampleCovariance sample_cov(const std::vector<CVector>& snapshots);

/// Same, with snapshots as the columns of an N x L matrix.
SampleCovariance sample_cov(const CMatrix& snapshots);

/// R <- alpha R + (1 - alpha) y y^H. An empty previous matrix starts the
/// recursion at zero.
SampleCovariance recursive_cov(const SampleCovariance& previous, const CVector& y, double alpha);

/// Non-blocking estimator using the precomputed per-bin cache.
PsdEstimates mle_nonblocking(const CMatrix& r, const SceneModel& scene);

PsdEstimates mle_nonblocking(const SampleCovariance& r, const SteeringVector& g, const CMatrix& v,
                             const CoherenceMatrix& gamma);

/// Blocking estimator on R_z = B^H R B. Returns phi_R and Psi_v; the speech
/// entries are zero and has_speech is false.
PsdEstimates mle_blocking(const CMatrix& r, const SceneModel& scene);

PsdEstimates mle_blocking(const SampleCovariance& r, const BlockingMatrix& b, const CMatrix& v,
                          const CoherenceMatrix& gamma);

/// w^H (R - phi_R G - V Psi V^H) w. Returns the raw value; callers floor.
double speech_psd_blocking(const CMatrix& r, const CVector& w, double phi_r, const CMatrix& psi_v,
                           const CMatrix& v, const CMatrix& gamma);

/// Fills phi_s / phi_s_raw of a blocking estimate from a given weight vector.
void complete_speech(PsdEstimates& est, const CMatrix& r, const CVector& w, const SceneModel& scene);

}  // namespace psdml
