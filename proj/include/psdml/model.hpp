#pragma once

// Time-invariant quantities of the multichannel signal model: steering
// vectors, diffuse-field coherence, the learned noise subspace and the
// speech blocking matrix.

#include <array>
#include <optional>
#include <vector>

#include "psdml/types.hpp"

namespace psdml {

inline constexpr double kDefaultSoundSpeed = 343.0;
inline constexpr double kDefaultCoherenceLoading = 1e-6;
inline constexpr double kDefaultRankEnergy = 0.995;

struct ArrayGeometry {
  std::vector<std::array<double, 3>> mic_positions;  // metres
  double sound_speed = kDefaultSoundSpeed;          // m/s
  double sample_rate = 16000.0;                     // Hz

  /// Equispaced collinear array along x with the first mic at the origin.
  static ArrayGeometry uniform_linear(int n_mics, double spacing_m,
                                      double sound_speed = kDefaultSoundSpeed,
                                      double sample_rate = 16000.0);

  int size() const { return static_cast<int>(mic_positions.size()); }
  double distance(int i, int j) const;
  /// Throws InvalidArgument unless N >= 3, sound_speed > 0, all finite.
  void validate() const;
};

/// Relative direct-path transfer function; entry 0 is exactly 1.
struct SteeringVector {
  CVector entries;
  int size() const { return static_cast<int>(entries.size()); }
};

/// Real symmetric unit-diagonal (before loading) coherence matrix, stored
/// complex so it can enter the complex solves directly.
struct CoherenceMatrix {
  CMatrix entries;
  Warnings warnings;
};

struct NoiseSubspace {
  CMatrix basis;        // N x T, orthonormal columns
  RVector eigenvalues;  // T values, descending
  Warnings warnings;
  int rank() const { return static_cast<int>(basis.cols()); }
};

struct BlockingMatrix {
  CMatrix entries;  // N x (N-1), orthonormal columns, B^H g = 0
};

/// Far-field ULA steering vector exp(-j 2 pi f tau_n), tau_n = n d sin(doa) / c.
SteeringVector rdtf_ula(double frequency_hz, double spacing_m, double doa_rad, int n_mics,
                        double sound_speed = kDefaultSoundSpeed);

/// Far-field steering vector for an arbitrary geometry; doa is measured from
/// broadside of the x axis in the x-y plane, delays relative to mic 0.
SteeringVector rdtf_far_field(double frequency_hz, const ArrayGeometry& geometry, double doa_rad);

/// Spherically diffuse coherence sinc(2 pi f d_ij / c), then diagonally
/// loaded: G <- (1 - eps) G + eps I. Duplicate microphone positions are
/// reported as a warning; the loaded matrix is still returned.
CoherenceMatrix diffuse_coherence(double frequency_hz, const ArrayGeometry& geometry,
                                  double loading = kDefaultCoherenceLoading);

/// Centre frequency of STFT bin k for an fft_size-point transform.
inline double bin_frequency(int bin, int fft_size, double sample_rate) {
  return static_cast<double>(bin) * sample_rate / static_cast<double>(fft_size);
}

/// Dominant `rank` eigenvectors of a Hermitian PSD noise covariance.
///
/// Eigenvalues are sorted descending; equal eigenvalues (within a relative
/// 1e-10 of the largest) are ordered by the index of each eigenvector's
/// largest-magnitude entry, earliest first. Every eigenvector is rotated so
/// that its largest-magnitude entry is real and positive. A tie between the
/// last kept and first dropped eigenvalue is reported as a warning because
/// the subspace is then not unique.
NoiseSubspace noise_subspace(const CMatrix& noise_cov, int rank);

/// Smallest rank whose cumulative eigenvalue energy reaches `energy`, capped
/// at N-2. When the cap binds, a warning is appended to `warnings` (the
/// covariance has no low-rank structure).
int select_rank(const CMatrix& noise_cov, double energy = kDefaultRankEnergy,
                Warnings* warnings = nullptr);

/// Orthonormal basis of the null space of g^H from the Householder
/// reflector that maps g onto the first axis.
BlockingMatrix blocking_matrix(const SteeringVector& g);

}  // namespace psdml
