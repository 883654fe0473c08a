#include "psdml/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

namespace psdml {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), 0x51u};
  return std::mt19937_64(seq);
}

double power(const RVector& x) { return x.size() ? x.squaredNorm() / static_cast<double>(x.size()) : 0.0; }

// Gaussian noise through a one-pole low-pass, with a slow random amplitude modulation.
RVector nonstationary_noise(Eigen::Index n, double sample_rate, std::uint64_t seed, std::uint64_t tag) {
  auto rng = stream(seed, tag);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double pole = 0.6 + 0.3 * ud(rng);
  const double f1 = 0.2 + 0.6 * ud(rng);
  const double f2 = 1.0 + 2.0 * ud(rng);
  const double p1 = 2.0 * std::numbers::pi * ud(rng);
  const double p2 = 2.0 * std::numbers::pi * ud(rng);
  RVector x(n);
  double state = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    state = pole * state + (1.0 - pole) * nd(rng);
    const double t = static_cast<double>(i) / sample_rate;
    const double env = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * f1 * t + p1) +
                       0.25 * std::sin(2.0 * std::numbers::pi * f2 * t + p2);
    x(i) = env * state;
  }
  return x;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_mics < 3) throw InvalidArgument("synth: need at least 3 microphones");
  if (!(spacing > 0.0)) throw InvalidArgument("synth: spacing must be positive");
  if (!(sample_rate > 0.0)) throw InvalidArgument("synth: sample rate must be positive");
  if (!(speech_seconds > 0.0) || !(noise_seconds >= 0.0)) throw InvalidArgument("synth: bad durations");
  if (noise_doas_deg.size() > static_cast<std::size_t>(n_mics - 2)) {
    throw InvalidArgument("synth: at most N-2 noise sources");
  }
  if (!(t60 > 0.0)) throw InvalidArgument("synth: t60 must be positive");
  if (reverb_delay_frames < 1) throw InvalidArgument("synth: reverb delay must be >= 1 frame");
}

ArrayGeometry SynthConfig::geometry() const {
  return ArrayGeometry::uniform_linear(n_mics, spacing, kDefaultSoundSpeed, sample_rate);
}

RVector speech_like(Eigen::Index n, double sample_rate, std::uint64_t seed) {
  auto rng = stream(seed, 1);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::normal_distribution<double> nd;
  RVector x = RVector::Zero(n);

  // Syllables of 120-300 ms separated by 40-250 ms gaps, with longer pauses now and then.
  Eigen::Index pos = static_cast<Eigen::Index>(0.05 * sample_rate);
  double phase = 0.0;
  while (pos < n) {
    const auto len = static_cast<Eigen::Index>((0.12 + 0.18 * ud(rng)) * sample_rate);
    const double f0a = 100.0 + 120.0 * ud(rng);
    const double f0b = f0a * (0.8 + 0.4 * ud(rng));
    const double formant1 = 300.0 + 600.0 * ud(rng);
    const double formant2 = 900.0 + 1600.0 * ud(rng);
    const bool voiced = ud(rng) < 0.8;
    const double level = 0.5 + ud(rng);
    for (Eigen::Index i = 0; i < len && pos + i < n; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(len);
      const double env = level * std::pow(std::sin(std::numbers::pi * u), 2.0);
      double v = 0.0;
      if (voiced) {
        const double f0 = f0a + (f0b - f0a) * u;
        phase += 2.0 * std::numbers::pi * f0 / sample_rate;
        for (int h = 1; h * f0 < 0.45 * sample_rate && h <= 60; ++h) {
          const double f = h * f0;
          const double a = 1.0 / (1.0 + std::pow((f - formant1) / 150.0, 2.0)) +
                           0.6 / (1.0 + std::pow((f - formant2) / 250.0, 2.0)) + 0.02;
          v += a * std::sin(h * phase);
        }
      } else {
        v = 0.3 * nd(rng);
      }
      x(pos + i) += env * v;
    }
    pos += len + static_cast<Eigen::Index>((ud(rng) < 0.15 ? 0.3 + 0.4 * ud(rng) : 0.04 + 0.21 * ud(rng)) *
                                           sample_rate);
  }
  return x;
}

RMatrix fractional_delays(const RVector& x, const std::vector<double>& delays) {
  double reach = 0.0;
  for (double d : delays) reach = std::max(reach, std::abs(d));
  const Eigen::Index need = x.size() + 2 * static_cast<Eigen::Index>(std::ceil(reach)) + 64;
  Eigen::Index nfft = 1;
  while (nfft < need) nfft *= 2;

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(nfft), 0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) buf[static_cast<std::size_t>(i)] = x(i);
  std::vector<cdouble> spec;
  fft.fwd(spec, buf);

  RMatrix out(x.size(), static_cast<Eigen::Index>(delays.size()));
  std::vector<cdouble> shifted(spec.size());
  std::vector<double> time;
  for (std::size_t c = 0; c < delays.size(); ++c) {
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double ph = -2.0 * std::numbers::pi * static_cast<double>(k) * delays[c] / static_cast<double>(nfft);
      shifted[k] = spec[k] * std::polar(1.0, ph);
    }
    shifted.back() = shifted.back().real();
    fft.inv(time, shifted, nfft);
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i, static_cast<Eigen::Index>(c)) = time[static_cast<std::size_t>(i)];
  }
  return out;
}

namespace {

std::vector<double> ula_delays(const SynthConfig& config, double doa_deg) {
  std::vector<double> d;
  for (int n = 0; n < config.n_mics; ++n) {
    d.push_back(n * config.spacing * std::sin(doa_deg * kDeg) / kDefaultSoundSpeed * config.sample_rate);
  }
  return d;
}

double segment_power(const RVector& x, Eigen::Index start) { return power(x.tail(x.size() - start)); }

}  // namespace

SynthMixture synthesize(const SynthConfig& config) {
  config.validate();
  const auto n_noise = static_cast<Eigen::Index>(std::lround(config.noise_seconds * config.sample_rate));
  const auto n_speech = static_cast<Eigen::Index>(std::lround(config.speech_seconds * config.sample_rate));
  const Eigen::Index n = n_noise + n_speech;
  const int mics = config.n_mics;

  RVector src = RVector::Zero(n);
  src.tail(n_speech) = speech_like(n_speech, config.sample_rate, config.seed);
  src /= std::sqrt(std::max(segment_power(src, n_noise), 1e-300));
  RMatrix direct = fractional_delays(src, ula_delays(config, config.speaker_doa_deg));
  direct.col(0) = src;

  // Late reverberation: exponentially decaying sum of past direct-path
  // periodograms, spatially shaped by the diffuse coherence.
  StftConfig sc;
  sc.sample_rate = config.sample_rate;
  Audio mono{config.sample_rate, src};
  const StftTensor s = stft(mono, sc);
  const double rho = std::pow(10.0, -6.0 * sc.hop() / (config.sample_rate * config.t60));
  const double lead = std::pow(rho, config.reverb_delay_frames);
  StftTensor r(mics, s.frames(), s.bins());
  const ArrayGeometry geom = config.geometry();
  auto rng = stream(config.seed, 2);
  std::normal_distribution<double> nd;
  for (int k = 0; k < s.bins(); ++k) {
    const CMatrix gamma = diffuse_coherence(bin_frequency(k, sc.fft_size(), config.sample_rate), geom,
                                            config.coherence_loading)
                              .entries;
    const CMatrix root = Eigen::LLT<CMatrix>(gamma).matrixL();
    double acc = 0.0;
    for (int m = 0; m < s.frames(); ++m) {
      const int src_frame = m - config.reverb_delay_frames;
      acc = rho * acc + (src_frame >= 0 ? lead * std::norm(s.at(0, src_frame, k)) : 0.0);
      CVector z(mics);
      for (int c = 0; c < mics; ++c) z(c) = cdouble(nd(rng), nd(rng)) * M_SQRT1_2;
      r.cell(m, k) = std::sqrt(acc) * (root * z);
    }
  }
  RMatrix reverb = istft(r, sc, n).samples;
  const double reverb_pow = segment_power(reverb.col(0), n_noise);
  if (reverb_pow > 0.0) reverb *= std::sqrt(std::pow(10.0, -config.drr_db / 10.0) / reverb_pow);

  RMatrix noise = RMatrix::Zero(n, mics);
  for (std::size_t j = 0; j < config.noise_doas_deg.size(); ++j) {
    const RVector x = nonstationary_noise(n, config.sample_rate, config.seed, 10 + j);
    noise += fractional_delays(x, ula_delays(config, config.noise_doas_deg[j]));
  }
  const double noise_pow = segment_power(noise.col(0), n_noise);
  if (noise_pow > 0.0) {
    const double reverberant = segment_power(direct.col(0) + reverb.col(0), n_noise);
    noise *= std::sqrt(reverberant / noise_pow * std::pow(10.0, -config.rsnr_db / 10.0));
  }

  const double sensor_sd = std::sqrt(std::pow(10.0, config.sensor_noise_db / 10.0));
  RMatrix sensor(n, mics);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < mics; ++c) sensor(i, c) = sensor_sd * nd(rng);
  }

  SynthMixture out;
  out.noise_samples = n_noise;
  out.mixture.sample_rate = config.sample_rate;
  out.mixture.samples = direct + reverb + noise + sensor;
  const double peak = out.mixture.samples.cwiseAbs().maxCoeff();
  const double scale = peak > 0.0 ? 0.5 / peak : 1.0;
  out.mixture.samples *= scale;
  out.clean = scale * direct.col(0);
  out.reverb_ref = scale * reverb.col(0);
  out.noise_ref = scale * noise.col(0);
  return out;
}

}  // namespace psdml
