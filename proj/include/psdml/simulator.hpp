#pragma once

// Monte-Carlo harness: random scenes with a rank-T noise field, snapshot
// synthesis, and estimator sweeps reported as normalized MSE next to the
// normalized Cramér-Rao bounds.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "psdml/beamform.hpp"
#include "psdml/estimators.hpp"
#include "psdml/model.hpp"

namespace psdml {

/// Per-trial random stream. The state is a function of (seed, trial, stream)
/// only, so trials can run in any order or on any thread.
class TrialRng {
 public:
  TrialRng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream = 0);
  double normal();
  /// CN(0, 1): (a + ib) / sqrt(2), a, b ~ N(0, 1).
  cdouble cnormal();
  CVector cnormal(int n);
  CMatrix cnormal(int rows, int cols);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

enum class SweepParam { kNone, kSnapshots, kSrr, kSrnr, kSnr };

std::string sweep_param_name(SweepParam p);
SweepParam parse_sweep_param(const std::string& name);

struct ScenarioConfig {
  int n_mics = 8;
  int rank = 2;  // T
  int snapshots = 100;  // L
  double spacing = 0.06;
  double frequency = 2000.0;
  double theta = 0.0;  // radians
  double phi_s = 0.5;
  double phi_r = 0.5;
  double p_u = 0.5;  // Frobenius norm of the noise covariance
  double sound_speed = kDefaultSoundSpeed;
  double coherence_loading = kDefaultCoherenceLoading;
  int trials = 1000;
  std::uint64_t seed = 1;
  int n_training = 200;
  bool training_with_reverb = false;
  int threads = 0;  // 0: hardware concurrency
  SweepParam sweep = SweepParam::kNone;
  std::vector<double> grid;

  /// Throws InvalidArgument on inconsistent values.
  void validate() const;
};

/// Default grid for each sweep parameter.
std::vector<double> default_grid(SweepParam p);

struct SimScene {
  SteeringVector g;
  CMatrix gamma;
  CMatrix gamma_sqrt;  // lower Cholesky factor of gamma
  CMatrix a_u;         // N x T
  CMatrix m;           // T x T, Psi_u = m m^H, scaled
  CMatrix psi_u;
  double psi_scale = 1.0;  // c with Psi_u = c * M0 M0^H

  CMatrix noise_covariance() const { return a_u * psi_u * a_u.adjoint(); }
};

/// Random A_u (i.i.d. CN(0,1)) and Psi_u = c M M^H with c chosen so that
/// ||A_u Psi_u A_u^H||_F = p_u.
SimScene gen_scene(const ScenarioConfig& config, TrialRng& rng);

/// Noise basis from n_training samples, each drawn with a fresh random
/// Psi_u (and diffuse reverberation at config.phi_r when training_with_reverb).
NoiseSubspace learn_v(const SimScene& scene, const ScenarioConfig& config, TrialRng& rng, int n_training);

/// y = g s + r + A_u s_u.
CVector draw_snapshot(const SimScene& scene, double phi_s, double phi_r, TrialRng& rng);

struct TrialResult {
  PsdEstimates nonblocking;
  PsdEstimates blocking;
  PsdEstimates truth;
  double err_phi_r_nb = 0.0;  // squared errors normalized by truth^2
  double err_phi_r_bb = 0.0;
  double err_phi_s = 0.0;
  double err_psi_mean = 0.0;
  double crb_phi_s = 0.0;  // normalized
  double crb_psi_mean = 0.0;
  double equivalence_diff = 0.0;  // max relative blocking/non-blocking gap
};

/// One Monte-Carlo trial at the configuration's parameter values.
TrialResult run_trial(const ScenarioConfig& config, std::uint64_t trial);

struct SweepRow {
  std::string sweep_param;
  double value = 0.0;
  double nmse_phi_r_nb = 0.0;
  double nmse_phi_r_bb = 0.0;
  double nmse_phi_s = 0.0;
  double nmse_psi_mean = 0.0;
  double crb_phi_r = 0.0;
  double crb_phi_s = 0.0;
  double crb_psi_mean = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double max_equivalence_diff = 0.0;
  Warnings warnings;
};

/// Configuration with the sweep parameter set to `value`.
ScenarioConfig at_grid_point(const ScenarioConfig& base, double value);

SweepRow run_point(const ScenarioConfig& config, double value, double* max_equivalence_diff = nullptr);

SweepResult run_sweep(const ScenarioConfig& config);

/// Sum in a fixed pairwise tree, independent of thread count.
double pairwise_sum(const double* x, std::size_t n);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Normalized bounds at one grid point, averaged over random scenes drawn as
/// in the Monte-Carlo trials. The fim_* entries are filled when the numeric
/// Fisher-information oracle is requested.
struct BoundsRow {
  std::string sweep_param;
  double value = 0.0;
  double crb_phi_r = 0.0;
  double crb_phi_s = 0.0;
  double crb_psi_mean = 0.0;
  double var_phi_r = 0.0;
  double var_phi_s = 0.0;
  double var_psi_mean = 0.0;
  bool has_fim = false;
  double fim_crb_phi_r = 0.0;
  double fim_crb_phi_s = 0.0;
  double fim_crb_psi_mean = 0.0;
  double fim_max_rel_diff = 0.0;  // worst per-scene gap to the closed forms
  int scenes = 0;
  std::uint64_t seed = 0;
};

std::vector<BoundsRow> run_bounds(const ScenarioConfig& config, int scenes, bool check_fim);

void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows);

}  // namespace psdml
