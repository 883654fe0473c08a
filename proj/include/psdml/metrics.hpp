#pragma once

// Objective speech-quality measures on single-channel signals.
//
// fwSNRseg: 30 ms Hamming frames with 75% overlap, 1024-point spectra, 25
// rectangular bands equally spaced on the mel scale between 50 Hz and half
// the sample rate. Per band, SNR = 10 log10(X^2 / (X - Y)^2) on band
// magnitudes, clamped to [-10, 35] dB and weighted by X^0.2. Frames whose
// reference energy lies more than 40 dB below the loudest frame are skipped.
//
// LLR: same framing, order-10 autocorrelation LPC, per-frame
// log(a_p R_c a_p' / a_c R_c a_c') clamped to [0, 2]; the mean over the 95%
// lowest frames is reported. Negative differences mean improvement.

#include <vector>

#include "psdml/types.hpp"

namespace psdml {

inline constexpr double kFwSnrCeiling = 35.0;
inline constexpr double kFwSnrFloor = -10.0;

/// Largest length mismatch accepted; longer inputs are truncated to the shorter.
inline constexpr Eigen::Index kMetricLengthTolerance = 512;

double fwsnrseg(const RVector& reference, const RVector& processed, double sample_rate);

double llr(const RVector& reference, const RVector& processed, double sample_rate);

/// Autocorrelation LPC via Levinson-Durbin; returns [1, a_1, ..., a_p].
RVector lpc(const RVector& frame, int order);

}  // namespace psdml
