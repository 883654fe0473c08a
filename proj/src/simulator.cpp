#include "psdml/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "psdml/bounds.hpp"
#include "psdml/parallel.hpp"

namespace psdml {

TrialRng::TrialRng(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  engine_.seed(seq);
}

double TrialRng::normal() { return normal_(engine_); }

cdouble TrialRng::cnormal() {
  const double re = normal();
  const double im = normal();
  return cdouble(re, im) * M_SQRT1_2;
}

CVector TrialRng::cnormal(int n) {
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = cnormal();
  return v;
}

CMatrix TrialRng::cnormal(int rows, int cols) {
  CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = cnormal();
  }
  return m;
}

std::string sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::kNone:
      return "none";
    case SweepParam::kSnapshots:
      return "snapshots";
    case SweepParam::kSrr:
      return "srr";
    case SweepParam::kSrnr:
      return "srnr";
    case SweepParam::kSnr:
      return "snr";
  }
  return "none";
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "none") return SweepParam::kNone;
  if (name == "snapshots" || name == "L") return SweepParam::kSnapshots;
  if (name == "srr") return SweepParam::kSrr;
  if (name == "srnr") return SweepParam::kSrnr;
  if (name == "snr") return SweepParam::kSnr;
  throw InvalidArgument("unknown sweep parameter '" + name + "' (expected none, snapshots, srr, srnr, snr)");
}

std::vector<double> default_grid(SweepParam p) {
  switch (p) {
    case SweepParam::kNone:
      return {0.0};
    case SweepParam::kSnapshots:
      return {25, 50, 100, 200, 400};
    case SweepParam::kSrr:
    case SweepParam::kSrnr:
      return {-20, -15, -10, -5, 0, 5, 10, 15, 20};
    case SweepParam::kSnr:
      return {-30, -20, -10, 0, 10, 20, 30};
  }
  return {0.0};
}

void ScenarioConfig::validate() const {
  if (n_mics < 3) throw InvalidArgument("n_mics must be >= 3");
  if (rank < 0 || rank > n_mics - 2) throw InvalidArgument("rank must lie in [0, N-2]");
  if (snapshots < 1) throw InvalidArgument("snapshots must be >= 1");
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (n_training < rank || n_training < 1) throw InvalidArgument("n_training must be >= rank and >= 1");
  for (double x : {spacing, frequency, theta, phi_s, phi_r, p_u, sound_speed}) {
    if (!std::isfinite(x)) throw InvalidArgument("scenario values must be finite");
  }
  if (!(spacing > 0.0)) throw InvalidArgument("spacing must be positive");
  if (!(frequency > 0.0)) throw InvalidArgument("frequency must be positive");
  if (!(phi_s > 0.0) || !(phi_r > 0.0)) throw InvalidArgument("phi_s and phi_r must be positive");
  if (rank > 0 && !(p_u > 0.0)) throw InvalidArgument("p_u must be positive when rank > 0");
  if (!(sound_speed > 0.0)) throw InvalidArgument("sound_speed must be positive");
  if (!(coherence_loading >= 0.0 && coherence_loading < 1.0)) {
    throw InvalidArgument("coherence_loading must lie in [0, 1)");
  }
  if (threads < 0) throw InvalidArgument("threads must be >= 0");
}

SimScene gen_scene(const ScenarioConfig& config, TrialRng& rng) {
  SimScene s;
  const int n = config.n_mics;
  const int t = config.rank;
  s.g = rdtf_ula(config.frequency, config.spacing, config.theta, n, config.sound_speed);
  const auto geometry = ArrayGeometry::uniform_linear(n, config.spacing, config.sound_speed);
  s.gamma = diffuse_coherence(config.frequency, geometry, config.coherence_loading).entries;
  Eigen::LLT<CMatrix> llt(s.gamma);
  if (llt.info() != Eigen::Success) throw NumericError("gen_scene: coherence matrix is not positive definite");
  s.gamma_sqrt = llt.matrixL();

  s.a_u = rng.cnormal(n, t);
  const CMatrix m0 = rng.cnormal(t, t);
  s.m = m0;
  s.psi_u = m0 * m0.adjoint();
  if (t > 0) {
    const double norm = (s.a_u * s.psi_u * s.a_u.adjoint()).norm();
    s.psi_scale = norm > 0.0 ? config.p_u / norm : 0.0;
    s.psi_u *= s.psi_scale;
    s.m *= std::sqrt(s.psi_scale);
  }
  return s;
}

NoiseSubspace learn_v(const SimScene& scene, const ScenarioConfig& config, TrialRng& rng, int n_training) {
  const int t = static_cast<int>(scene.a_u.cols());
  if (n_training < t || n_training < 1) throw InvalidArgument("learn_v: need at least T training samples");
  const int n = static_cast<int>(scene.a_u.rows());
  CMatrix cov = CMatrix::Zero(n, n);
  const double r_scale = std::sqrt(config.phi_r);
  for (int j = 0; j < n_training; ++j) {
    // A fresh random source covariance for every training sample.
    const CMatrix mj = rng.cnormal(t, t) * std::sqrt(scene.psi_scale);
    CVector u = scene.a_u * (mj * rng.cnormal(t));
    if (config.training_with_reverb) u += r_scale * (scene.gamma_sqrt * rng.cnormal(n));
    cov += u * u.adjoint();
  }
  cov /= static_cast<double>(n_training);
  return noise_subspace(hermitian_part(cov), t);
}

CVector draw_snapshot(const SimScene& scene, double phi_s, double phi_r, TrialRng& rng) {
  const int n = static_cast<int>(scene.gamma.rows());
  const int t = static_cast<int>(scene.a_u.cols());
  const cdouble s = std::sqrt(phi_s) * rng.cnormal();
  const CVector zr = rng.cnormal(n);
  const CVector zu = rng.cnormal(t);
  CVector y = s * scene.g.entries + std::sqrt(phi_r) * (scene.gamma_sqrt * zr);
  if (t > 0) y += scene.a_u * (scene.m * zu);
  return y;
}

namespace {

double rel_gap(double a, double b) {
  const double den = std::max(std::abs(a), std::abs(b));
  return den > 0.0 ? std::abs(a - b) / den : 0.0;
}

double rel_gap(const CMatrix& a, const CMatrix& b) {
  const double den = std::max(a.norm(), b.norm());
  return den > 0.0 ? (a - b).norm() / den : 0.0;
}

}  // namespace

TrialResult run_trial(const ScenarioConfig& config, std::uint64_t trial) {
  TrialRng rng(config.seed, trial);
  const SimScene scene = gen_scene(config, rng);
  const NoiseSubspace v = learn_v(scene, config, rng, config.n_training);
  const SceneModel model = SceneModel::build(scene.g, v.basis, scene.gamma);

  CMatrix y(config.n_mics, config.snapshots);
  for (int l = 0; l < config.snapshots; ++l) y.col(l) = draw_snapshot(scene, config.phi_s, config.phi_r, rng);
  const SampleCovariance r = sample_cov(y);

  TrialResult out;
  out.truth.phi_r = out.truth.phi_r_raw = config.phi_r;
  out.truth.phi_s = out.truth.phi_s_raw = config.phi_s;
  out.truth.psi_v = out.truth.psi_v_raw = hermitian_part(v.basis.adjoint() * scene.noise_covariance() * v.basis);
  out.nonblocking = mle_nonblocking(r.matrix, model);
  out.blocking = mle_blocking(r.matrix, model);

  const auto sq = [](double est, double truth) {
    const double e = (est - truth) / truth;
    return e * e;
  };
  out.err_phi_r_nb = sq(out.nonblocking.phi_r_raw, config.phi_r);
  out.err_phi_r_bb = sq(out.blocking.phi_r_raw, config.phi_r);
  out.err_phi_s = sq(out.nonblocking.phi_s_raw, config.phi_s);

  const VarianceReport vr = variance_report(model, out.truth, static_cast<double>(config.snapshots));
  out.crb_phi_s = vr.var_phi_s / (config.phi_s * config.phi_s);
  if (config.rank > 0) {
    double err = 0.0;
    double crb = 0.0;
    for (int i = 0; i < config.rank; ++i) {
      const double psi = out.truth.psi_v(i, i).real();
      err += sq(out.nonblocking.psi_v_raw(i, i).real(), psi);
      crb += vr.var_psi_diag[static_cast<std::size_t>(i)] / (psi * psi);
    }
    out.err_psi_mean = err / config.rank;
    out.crb_psi_mean = crb / config.rank;
  }
  out.equivalence_diff = std::max(rel_gap(out.nonblocking.phi_r_raw, out.blocking.phi_r_raw),
                                  rel_gap(out.nonblocking.psi_v_raw, out.blocking.psi_v_raw));
  return out;
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

ScenarioConfig at_grid_point(const ScenarioConfig& base, double value) {
  ScenarioConfig c = base;
  switch (base.sweep) {
    case SweepParam::kNone:
      break;
    case SweepParam::kSnapshots:
      if (value < 1.0 || value != std::floor(value)) {
        throw InvalidArgument("snapshot grid values must be positive integers");
      }
      c.snapshots = static_cast<int>(value);
      break;
    case SweepParam::kSrr:  // 10 log10(phi_S / phi_R)
      c.phi_r = base.phi_s * std::pow(10.0, -value / 10.0);
      break;
    case SweepParam::kSrnr:  // 10 log10(phi_S / (phi_R + P_u))
      c.phi_s = (base.phi_r + base.p_u) * std::pow(10.0, value / 10.0);
      break;
    case SweepParam::kSnr:  // 10 log10(phi_S / P_u)
      c.p_u = base.phi_s * std::pow(10.0, -value / 10.0);
      break;
  }
  return c;
}

SweepRow run_point(const ScenarioConfig& config, double value, double* max_equivalence_diff) {
  const ScenarioConfig c = at_grid_point(config, value);
  c.validate();
  const auto n = static_cast<std::size_t>(c.trials);
  std::vector<TrialResult> results(n);
  parallel_for(n, c.threads, [&](std::size_t i) { results[i] = run_trial(c, i); });

  const auto mean_of = [&](double TrialResult::*field) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = results[i].*field;
    return pairwise_sum(x.data(), n) / static_cast<double>(n);
  };
  SweepRow row;
  row.sweep_param = sweep_param_name(c.sweep);
  row.value = value;
  row.nmse_phi_r_nb = mean_of(&TrialResult::err_phi_r_nb);
  row.nmse_phi_r_bb = mean_of(&TrialResult::err_phi_r_bb);
  row.nmse_phi_s = mean_of(&TrialResult::err_phi_s);
  row.nmse_psi_mean = c.rank > 0 ? mean_of(&TrialResult::err_psi_mean) : 0.0;
  row.crb_phi_r = var_phi_r(1.0, c.snapshots, c.n_mics, c.rank);
  row.crb_phi_s = mean_of(&TrialResult::crb_phi_s);
  row.crb_psi_mean = c.rank > 0 ? mean_of(&TrialResult::crb_psi_mean) : 0.0;
  row.trials = c.trials;
  row.seed = c.seed;
  if (max_equivalence_diff != nullptr) {
    for (const auto& r : results) *max_equivalence_diff = std::max(*max_equivalence_diff, r.equivalence_diff);
  }
  return row;
}

SweepResult run_sweep(const ScenarioConfig& config) {
  config.validate();
  SweepResult out;
  const std::vector<double> grid =
      config.grid.empty() ? default_grid(config.sweep) : config.grid;
  for (double value : grid) out.rows.push_back(run_point(config, value, &out.max_equivalence_diff));
  if (out.max_equivalence_diff > 1e-10) {
    out.warnings.push_back("blocking and non-blocking estimates differ by more than 1e-10 relative");
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "sweep_param,value,nmse_phiR_nb,nmse_phiR_bb,nmse_phiS,nmse_psi_mean,crb_phiR,crb_phiS,"
         "crb_psi_mean,trials,seed\n";
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(9);
  out.unsetf(std::ios::floatfield);
  for (const auto& r : rows) {
    out << r.sweep_param << ',' << r.value << ',' << r.nmse_phi_r_nb << ',' << r.nmse_phi_r_bb << ','
        << r.nmse_phi_s << ',' << r.nmse_psi_mean << ',' << r.crb_phi_r << ',' << r.crb_phi_s << ','
        << r.crb_psi_mean << ',' << r.trials << ',' << r.seed << '\n';
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

}  // namespace psdml

namespace psdml {

std::vector<BoundsRow> run_bounds(const ScenarioConfig& config, int scenes, bool check_fim) {
  config.validate();
  if (scenes < 1) throw InvalidArgument("bounds: need at least one scene");
  const std::vector<double> grid = config.grid.empty() ? default_grid(config.sweep) : config.grid;
  if (grid.empty()) throw InvalidArgument("bounds: empty grid");
  std::vector<BoundsRow> rows;
  for (double value : grid) {
    const ScenarioConfig c = at_grid_point(config, value);
    c.validate();
    const auto n = static_cast<std::size_t>(scenes);
    const double l = c.snapshots;
    std::vector<double> crb_s(n), crb_psi(n), fim_r(n), fim_s(n), fim_psi(n), gap(n);
    parallel_for(n, c.threads, [&](std::size_t i) {
      TrialRng rng(c.seed, i, 1);
      const SimScene scene = gen_scene(c, rng);
      const NoiseSubspace v = learn_v(scene, c, rng, c.n_training);
      const SceneModel model = SceneModel::build(scene.g, v.basis, scene.gamma);
      PsdEstimates truth;
      truth.phi_r = c.phi_r;
      truth.phi_s = c.phi_s;
      truth.psi_v = hermitian_part(v.basis.adjoint() * scene.noise_covariance() * v.basis);
      const CrbReport cf = crb_closed_form(model, truth, l);
      crb_s[i] = cf.crb_phi_s / (c.phi_s * c.phi_s);
      double psi_sum = 0.0;
      for (int t = 0; t < c.rank; ++t) {
        const double p = truth.psi_v(t, t).real();
        psi_sum += cf.crb_psi_diag[static_cast<std::size_t>(t)] / (p * p);
      }
      crb_psi[i] = c.rank > 0 ? psi_sum / c.rank : 0.0;
      if (check_fim) {
        const CrbReport fim = fim_numeric(model, truth, l);
        const auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
        double worst = std::max(rel(fim.crb_phi_r, cf.crb_phi_r), rel(fim.crb_phi_s, cf.crb_phi_s));
        double fim_psi_sum = 0.0;
        for (int t = 0; t < c.rank; ++t) {
          const auto tt = static_cast<std::size_t>(t);
          worst = std::max(worst, rel(fim.crb_psi_diag[tt], cf.crb_psi_diag[tt]));
          const double p = truth.psi_v(t, t).real();
          fim_psi_sum += fim.crb_psi_diag[tt] / (p * p);
        }
        fim_r[i] = fim.crb_phi_r / (c.phi_r * c.phi_r);
        fim_s[i] = fim.crb_phi_s / (c.phi_s * c.phi_s);
        fim_psi[i] = c.rank > 0 ? fim_psi_sum / c.rank : 0.0;
        gap[i] = worst;
      }
    });
    const auto mean = [&](const std::vector<double>& x) { return pairwise_sum(x.data(), n) / static_cast<double>(n); };
    BoundsRow row;
    row.sweep_param = sweep_param_name(c.sweep);
    row.value = value;
    row.crb_phi_r = var_phi_r(1.0, l, c.n_mics, c.rank);
    row.crb_phi_s = mean(crb_s);
    row.crb_psi_mean = mean(crb_psi);
    // The closed-form bounds and the analytic variances are the same expressions.
    row.var_phi_r = row.crb_phi_r;
    row.var_phi_s = row.crb_phi_s;
    row.var_psi_mean = row.crb_psi_mean;
    row.has_fim = check_fim;
    if (check_fim) {
      row.fim_crb_phi_r = mean(fim_r);
      row.fim_crb_phi_s = mean(fim_s);
      row.fim_crb_psi_mean = mean(fim_psi);
      row.fim_max_rel_diff = *std::max_element(gap.begin(), gap.end());
    }
    row.scenes = scenes;
    row.seed = c.seed;
    rows.push_back(row);
  }
  return rows;
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows) {
  const bool fim = !rows.empty() && rows.front().has_fim;
  out << "sweep_param,value,crb_phiR,crb_phiS,crb_psi_mean,var_phiR,var_phiS,var_psi_mean";
  if (fim) out << ",fim_crb_phiR,fim_crb_phiS,fim_crb_psi_mean,fim_max_rel_diff";
  out << ",scenes,seed\n";
  const auto old_prec = out.precision();
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.sweep_param << ',' << r.value << ',' << r.crb_phi_r << ',' << r.crb_phi_s << ',' << r.crb_psi_mean
        << ',' << r.var_phi_r << ',' << r.var_phi_s << ',' << r.var_psi_mean;
    if (fim) {
      out << ',' << r.fim_crb_phi_r << ',' << r.fim_crb_phi_s << ',' << r.fim_crb_psi_mean << ','
          << r.fim_max_rel_diff;
    }
    out << ',' << r.scenes << ',' << r.seed << '\n';
  }
  out.precision(old_prec);
}

}  // namespace psdml
