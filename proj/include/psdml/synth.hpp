#pragma once

// Model-matched multichannel test mixtures: a speech-like source at a known
// direction, late reverberation drawn with the diffuse coherence in the STFT
// domain, and directional non-stationary noise sources. A noise-only
// preamble precedes the speech.

#include <cstdint>
#include <vector>

#include "psdml/model.hpp"
#include "psdml/stft.hpp"

namespace psdml {

struct SynthConfig {
  int n_mics = 8;
  double spacing = 0.04;
  double sample_rate = 16000.0;
  double speech_seconds = 9.0;
  double noise_seconds = 1.0;  // noise-only preamble
  double speaker_doa_deg = 20.0;
  std::vector<double> noise_doas_deg{-50.0, 65.0};
  double rsnr_db = 5.0;    // reverberant speech to noise at the reference mic
  double drr_db = 0.0;     // direct speech to reverberation at the reference mic
  double t60 = 0.5;        // seconds
  int reverb_delay_frames = 4;
  double sensor_noise_db = -60.0;  // relative to the direct speech power
  double coherence_loading = kDefaultCoherenceLoading;
  std::uint64_t seed = 7;

  void validate() const;
  ArrayGeometry geometry() const;
};

struct SynthMixture {
  Audio mixture;       // n_samples x N
  RVector clean;       // direct-path speech at the reference microphone
  RVector reverb_ref;  // reverberation at the reference microphone
  RVector noise_ref;   // directional noise at the reference microphone
  Eigen::Index noise_samples = 0;
};

/// Harmonic source with a gliding pitch, formant-like spectral tilt and a
/// syllabic on/off envelope.
RVector speech_like(Eigen::Index n, double sample_rate, std::uint64_t seed);

/// Column n is x delayed by delays[n] samples (fractional, possibly
/// negative), applied as a phase ramp on the zero-padded spectrum.
RMatrix fractional_delays(const RVector& x, const std::vector<double>& delays);

SynthMixture synthesize(const SynthConfig& config);

}  // namespace psdml
