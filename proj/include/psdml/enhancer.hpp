#pragma once

// Multichannel Wiener filter: MVDR beamformer steered at the speaker with an
// interference matrix built from the estimated reverberation and noise PSDs,
// followed by a single-channel Wiener postfilter.

#include <ostream>
#include <string>
#include <vector>

#include "psdml/beamform.hpp"
#include "psdml/estimators.hpp"
#include "psdml/model.hpp"
#include "psdml/stft.hpp"

namespace psdml {

enum class Variant { kNbDir, kBbDir, kNbDd, kBbDd };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct EnhancerConfig {
  StftConfig stft;
  ArrayGeometry geometry;
  double doa = 0.0;  // radians from broadside
  double noise_seconds = 1.0;
  int rank = -1;  // -1: per-bin automatic selection
  double rank_energy = kDefaultRankEnergy;
  double alpha = 0.7;  // covariance smoothing
  double beta = 0.9;   // decision-directed weight
  double gain_floor_db = -15.0;
  double coherence_loading = kDefaultCoherenceLoading;
  Variant variant = Variant::kNbDir;
  int threads = 0;
  bool keep_psd = false;  // fill EnhanceResult::psd

  void validate() const;
};

inline constexpr double kMinNoiseSeconds = 0.25;

/// Per-bin time-invariant state learned from the leading noise segment.
struct BinModel {
  int bin = 0;
  double frequency = 0.0;
  SceneModel scene;
  CMatrix noise_cov;
  bool fallback = false;  // noise basis dropped because of degenerate geometry
};

struct PsdRecord {
  int frame = 0;
  int bin = 0;
  double phi_r = 0.0;
  double phi_s = 0.0;
  double psi_trace = 0.0;
  double gain = 0.0;
};

struct EnhanceResult {
  Audio output;  // mono, same length and rate as the input
  std::vector<int> rank_per_bin;
  int fallback_bins = 0;
  long loaded_cells = 0;  // cells where the interference matrix was loaded
  Warnings warnings;
  std::vector<PsdRecord> psd;
};

/// Per-bin noise covariance over the first noise_frames frames and the
/// resulting noise basis, with the degenerate-bin fallback to T = 0.
std::vector<BinModel> learn_noise_basis(const StftTensor& spec, int noise_frames, const EnhancerConfig& config,
                                        Warnings* warnings);

/// Frames entirely inside the leading `seconds` of audio.
int noise_frame_count(double seconds, const StftConfig& config);

/// One MCWF step for one cell, exposed for tests. `r` is the updated
/// covariance; `prev_out` / `prev_phi_re` hold the decision-directed memory
/// and are updated in place (prev_phi_re < 0 marks the first frame).
struct CellOutput {
  cdouble value;
  double gain = 0.0;
  double phi_re = 0.0;
  PsdEstimates psd;
  bool loaded = false;
};
CellOutput mcwf_cell(const CVector& y, const CMatrix& r, const BinModel& model, const EnhancerConfig& config,
                     cdouble& prev_out, double& prev_phi_re);

EnhanceResult enhance(const Audio& input, const EnhancerConfig& config);

void write_psd_csv(std::ostream& out, const std::vector<PsdRecord>& rows);

}  // namespace psdml
