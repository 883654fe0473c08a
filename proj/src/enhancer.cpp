#include "psdml/enhancer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "psdml/estimators.hpp"
#include "psdml/kernels.hpp"
#include "psdml/parallel.hpp"

namespace psdml {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kNbDir:
      return "nb-dir";
    case Variant::kBbDir:
      return "bb-dir";
    case Variant::kNbDd:
      return "nb-dd";
    case Variant::kBbDd:
      return "bb-dd";
  }
  return "nb-dir";
}

Variant parse_variant(const std::string& name) {
  if (name == "nb-dir") return Variant::kNbDir;
  if (name == "bb-dir") return Variant::kBbDir;
  if (name == "nb-dd") return Variant::kNbDd;
  if (name == "bb-dd") return Variant::kBbDd;
  throw InvalidArgument("unknown variant '" + name + "' (expected nb-dir, bb-dir, nb-dd, bb-dd)");
}

namespace {

bool is_blocking(Variant v) { return v == Variant::kBbDir || v == Variant::kBbDd; }
bool is_dd(Variant v) { return v == Variant::kNbDd || v == Variant::kBbDd; }

}  // namespace

void EnhancerConfig::validate() const {
  stft.validate();
  geometry.validate();
  const int n = geometry.size();
  if (rank < -1 || rank > n - 2) throw InvalidArgument("rank must be -1 (auto) or lie in [0, N-2]");
  if (!(noise_seconds >= kMinNoiseSeconds)) {
    throw InvalidArgument("noise segment must be at least 0.25 s long");
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in [0, 1)");
  if (!(beta >= 0.0 && beta < 1.0)) throw InvalidArgument("beta must lie in [0, 1)");
  if (!(gain_floor_db <= 0.0)) throw InvalidArgument("gain floor must be <= 0 dB");
  if (!(rank_energy > 0.0 && rank_energy <= 1.0)) throw InvalidArgument("rank energy must lie in (0, 1]");
  if (!std::isfinite(doa)) throw InvalidArgument("doa must be finite");
  if (threads < 0) throw InvalidArgument("threads must be >= 0");
}

int noise_frame_count(double seconds, const StftConfig& config) {
  const auto samples = static_cast<long>(std::floor(seconds * config.sample_rate));
  // Frame m covers padded samples [m*hop, m*hop + fft) = original [m*hop - pad, m*hop + hop).
  return static_cast<int>(samples / config.hop());
}

std::vector<BinModel> learn_noise_basis(const StftTensor& spec, int noise_frames, const EnhancerConfig& config,
                                        Warnings* warnings) {
  if (noise_frames < 1 || noise_frames > spec.frames()) {
    throw InvalidArgument("learn_noise_basis: noise segment is empty or longer than the signal");
  }
  if (spec.channels() != config.geometry.size()) {
    throw InvalidArgument("learn_noise_basis: channel count does not match the array geometry");
  }
  const int n = spec.channels();
  const int bins = spec.bins();
  std::vector<BinModel> models(static_cast<std::size_t>(bins));
  std::vector<Warnings> local(static_cast<std::size_t>(bins));
  std::vector<int> capped(static_cast<std::size_t>(bins), 0);

  parallel_for(static_cast<std::size_t>(bins), config.threads, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    BinModel& m = models[kk];
    m.bin = k;
    m.frequency = bin_frequency(k, config.stft.fft_size(), config.stft.sample_rate);
    m.noise_cov = CMatrix::Zero(n, n);
    for (int f = 0; f < noise_frames; ++f) kernels::herm_rank1_update(m.noise_cov, spec.cell(f, k), 1.0, 1.0);
    m.noise_cov /= static_cast<double>(noise_frames);

    int t = config.rank;
    if (t < 0) {
      Warnings w;
      t = select_rank(m.noise_cov, config.rank_energy, &w);
      capped[kk] = w.empty() ? 0 : 1;
    }
    const NoiseSubspace v = noise_subspace(m.noise_cov, t);
    const SteeringVector g = rdtf_far_field(m.frequency, config.geometry, config.doa);
    const CMatrix gamma = diffuse_coherence(m.frequency, config.geometry, config.coherence_loading).entries;
    try {
      m.scene = SceneModel::build(g, v.basis, gamma);
    } catch (const DegenerateGeometry& e) {
      m.fallback = true;
      m.scene = SceneModel::build(g, CMatrix(n, 0), gamma);
      local[kk].push_back("bin " + std::to_string(k) + ": " + e.what() + "; using T = 0");
    }
  });

  if (warnings != nullptr) {
    for (const auto& w : local) warnings->insert(warnings->end(), w.begin(), w.end());
    const int n_capped = static_cast<int>(std::count(capped.begin(), capped.end(), 1));
    if (n_capped > 0) {
      warnings->push_back(std::to_string(n_capped) + " of " + std::to_string(bins) +
                          " bins show no low-rank noise structure; rank capped at N-2");
    }
  }
  return models;
}

CellOutput mcwf_cell(const CVector& y, const CMatrix& r, const BinModel& model, const EnhancerConfig& config,
                     cdouble& prev_out, double& prev_phi_re) {
  const SceneModel& sc = model.scene;
  CellOutput out;
  out.psd = is_blocking(config.variant) ? mle_blocking(r, sc) : mle_nonblocking(r, sc);
  const PsdEstimates& e = out.psd;

  CMatrix phi_i = e.phi_r * sc.gamma.matrix();
  if (sc.rank > 0) phi_i += sc.v * e.psi_v * sc.v.adjoint();
  phi_i = hermitian_part(phi_i);
  const double tr = phi_i.trace().real();
  const double gain_floor = std::pow(10.0, config.gain_floor_db / 20.0);
  if (!(tr > 0.0)) {
    out.value = 0.0;
    out.gain = gain_floor;
    return out;
  }
  Eigen::LLT<CMatrix> llt(phi_i);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const RVector d = llt.matrixLLT().diagonal().real();
    const double lo = d.minCoeff();
    const double hi = d.maxCoeff();
    ok = lo > 0.0 && (lo * lo) / (hi * hi) > 1e-12;
  }
  if (!ok) {
    phi_i += (1e-10 * tr) * CMatrix::Identity(phi_i.rows(), phi_i.cols());
    llt.compute(phi_i);
    out.loaded = true;
    if (llt.info() != Eigen::Success) throw NumericError("interference matrix is not positive definite");
  }

  const CVector& g = sc.g.entries;
  const CVector u = llt.solve(g);
  const double den = g.dot(u).real();
  out.phi_re = 1.0 / den;
  const CVector w = u / den;
  const cdouble s_mvdr = w.dot(y);  // w^H y

  double gamma_hat = 0.0;
  if (is_dd(config.variant)) {
    const double inst = std::max(std::norm(s_mvdr) - out.phi_re, 0.0) / out.phi_re;
    gamma_hat = prev_phi_re < 0.0
                    ? inst
                    : config.beta * std::norm(prev_out) / prev_phi_re + (1.0 - config.beta) * inst;
  } else {
    double phi_s = e.phi_s;
    if (is_blocking(config.variant)) {
      out.psd.phi_s_raw = speech_psd_blocking(r, w, e.phi_r, e.psi_v, sc.v, sc.gamma.matrix());
      out.psd.phi_s = phi_s = std::max(out.psd.phi_s_raw, power_floor(r));
      out.psd.has_speech = true;
    }
    gamma_hat = phi_s / out.phi_re;
  }
  out.gain = std::clamp(gamma_hat / (gamma_hat + 1.0), gain_floor, 1.0);
  out.value = out.gain * s_mvdr;
  prev_out = out.value;
  prev_phi_re = out.phi_re;
  return out;
}

EnhanceResult enhance(const Audio& input, const EnhancerConfig& config) {
  config.validate();
  if (input.channels() != config.geometry.size()) {
    throw InvalidArgument("input has " + std::to_string(input.channels()) + " channels but the array has " +
                          std::to_string(config.geometry.size()) + " microphones");
  }
  if (std::abs(input.sample_rate - config.stft.sample_rate) > 1e-9) {
    throw InvalidArgument("input sample rate " + std::to_string(input.sample_rate) + " Hz does not match " +
                          std::to_string(config.stft.sample_rate) + " Hz");
  }
  if (input.length() < static_cast<Eigen::Index>(std::ceil(config.noise_seconds * input.sample_rate))) {
    throw InvalidArgument("input is shorter than the noise segment");
  }

  EnhanceResult result;
  const StftTensor spec = stft(input, config.stft);
  const int noise_frames = noise_frame_count(config.noise_seconds, config.stft);
  const std::vector<BinModel> models = learn_noise_basis(spec, noise_frames, config, &result.warnings);

  const int bins = spec.bins();
  const int frames = spec.frames();
  StftTensor out_spec(1, frames, bins);
  std::vector<long> loaded(static_cast<std::size_t>(bins), 0);
  std::vector<std::vector<PsdRecord>> psd(static_cast<std::size_t>(config.keep_psd ? bins : 0));

  parallel_for(static_cast<std::size_t>(bins), config.threads, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    const BinModel& model = models[kk];
    SampleCovariance r{model.noise_cov, (1.0 + config.alpha) / (1.0 - config.alpha)};
    cdouble prev_out = 0.0;
    double prev_phi_re = -1.0;
    for (int m = 0; m < frames; ++m) {
      const CVector y = spec.cell(m, k);
      kernels::herm_rank1_update(r.matrix, y, config.alpha, 1.0 - config.alpha);
      const CellOutput c = mcwf_cell(y, r.matrix, model, config, prev_out, prev_phi_re);
      out_spec.at(0, m, k) = c.value;
      if (c.loaded) ++loaded[kk];
      if (config.keep_psd) {
        psd[kk].push_back(PsdRecord{m, k, c.psd.phi_r, c.psd.phi_s,
                                    c.psd.psi_v.size() ? c.psd.psi_v.trace().real() : 0.0, c.gain});
      }
    }
  });

  result.output = istft(out_spec, config.stft, input.length());
  result.output.sample_rate = input.sample_rate;
  for (const auto& m : models) {
    result.rank_per_bin.push_back(m.scene.rank);
    if (m.fallback) ++result.fallback_bins;
  }
  for (long c : loaded) result.loaded_cells += c;
  if (result.loaded_cells > 0) {
    result.warnings.push_back(std::to_string(result.loaded_cells) +
                              " cells needed diagonal loading of the interference matrix");
  }
  if (config.keep_psd) {
    result.psd.reserve(static_cast<std::size_t>(frames) * bins);
    for (int m = 0; m < frames; ++m) {
      for (int k = 0; k < bins; ++k) result.psd.push_back(psd[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)]);
    }
  }
  return result;
}

void write_psd_csv(std::ostream& out, const std::vector<PsdRecord>& rows) {
  out << "frame,bin,phi_r,phi_s,psi_trace,gain\n";
  const auto old_prec = out.precision();
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.frame << ',' << r.bin << ',' << r.phi_r << ',' << r.phi_s << ',' << r.psi_trace << ',' << r.gain
        << '\n';
  }
  out.precision(old_prec);
}

}  // namespace psdml
