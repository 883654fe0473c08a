#include "psdml/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "psdml/kernels.hpp"

namespace psdml {

int StftConfig::fft_size() const { return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0)); }

int StftConfig::hop() const { return static_cast<int>(std::lround(fft_size() * (1.0 - overlap))); }

void StftConfig::validate() const {
  if (!(sample_rate > 0.0) || !(window_ms > 0.0)) throw InvalidArgument("STFT: window and rate must be positive");
  if (!(overlap >= 0.5 && overlap < 1.0)) throw InvalidArgument("STFT: overlap must lie in [0.5, 1)");
  const int n = fft_size();
  const int h = hop();
  if (n < 4 || n % 2 != 0) throw InvalidArgument("STFT: window length must be even and >= 4 samples");
  if (h < 1 || (n / 2) % h != 0) {
    throw InvalidArgument("STFT: hop must divide half the window for perfect reconstruction");
  }
}

StftTensor::StftTensor(int channels, int frames, int bins)
    : channels_(channels),
      frames_(frames),
      bins_(bins),
      data_(static_cast<std::size_t>(channels) * frames * bins, cdouble(0.0, 0.0)) {}

RVector sqrt_hann(int n) {
  RVector w(n);
  for (int i = 0; i < n; ++i) w(i) = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n));
  return w;
}

int stft_frame_count(Eigen::Index n_samples, const StftConfig& config) {
  const Eigen::Index pad = config.fft_size() - config.hop();
  if (n_samples <= 0) return 0;
  return static_cast<int>((n_samples + pad - 1) / config.hop() + 1);
}

StftTensor stft(const Audio& audio, const StftConfig& config) {
  config.validate();
  if (std::abs(audio.sample_rate - config.sample_rate) > 1e-9) {
    throw InvalidArgument("STFT: audio sample rate does not match the configuration");
  }
  const int n = config.fft_size();
  const int h = config.hop();
  const int pad = n - h;
  const int frames = stft_frame_count(audio.length(), config);
  StftTensor out(audio.channels(), frames, n / 2 + 1);
  const RVector w = sqrt_hann(n);

  const auto& kt = kernels::active();
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  // Zero-padded copy of one channel: pad in front, a full frame behind.
  std::vector<double> padded(static_cast<std::size_t>(pad + audio.length() + n), 0.0);
  std::vector<double> buf(static_cast<std::size_t>(n));
  std::vector<cdouble> spec;
  for (int c = 0; c < audio.channels(); ++c) {
    std::copy_n(audio.samples.col(c).data(), audio.length(), padded.begin() + pad);
    for (int m = 0; m < frames; ++m) {
      kt.mul(buf.data(), w.data(), padded.data() + static_cast<std::size_t>(m) * h, static_cast<std::size_t>(n));
      fft.fwd(spec, buf);
      for (int k = 0; k <= n / 2; ++k) out.at(c, m, k) = spec[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

Audio istft(const StftTensor& spec, const StftConfig& config, Eigen::Index length) {
  config.validate();
  const int n = config.fft_size();
  const int h = config.hop();
  const int pad = n - h;
  if (spec.bins() != n / 2 + 1) throw InvalidArgument("ISTFT: bin count does not match the configuration");
  Audio out;
  out.sample_rate = config.sample_rate;
  out.samples = RMatrix::Zero(length, spec.channels());
  // sum_m w^2(n - mH) = n / (2H) for a Hann window.
  const RVector w = (2.0 * h / n) * sqrt_hann(n);

  const auto& kt = kernels::active();
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<cdouble> bins(static_cast<std::size_t>(n / 2 + 1));
  std::vector<double> frame;
  std::vector<double> acc(static_cast<std::size_t>(spec.frames()) * h + n);
  for (int c = 0; c < spec.channels(); ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int m = 0; m < spec.frames(); ++m) {
      for (int k = 0; k <= n / 2; ++k) bins[static_cast<std::size_t>(k)] = spec.at(c, m, k);
      // A real frame needs real DC and Nyquist bins.
      bins.front() = bins.front().real();
      bins.back() = bins.back().real();
      fft.inv(frame, bins, n);
      kt.mul_add(acc.data() + static_cast<std::size_t>(m) * h, w.data(), frame.data(), static_cast<std::size_t>(n));
    }
    const Eigen::Index avail = std::max<Eigen::Index>(0, std::min<Eigen::Index>(length, static_cast<Eigen::Index>(acc.size()) - pad));
    std::copy_n(acc.begin() + pad, avail, out.samples.col(c).data());
  }
  return out;
}

}  // namespace psdml
