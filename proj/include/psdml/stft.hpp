#pragma once

// Multichannel STFT with a periodic square-root Hann window used for both
// analysis and synthesis. The signal is front-padded by fft_size - hop
// samples so that istft(stft(x)) returns x aligned and at full length.

#include <vector>

#include "psdml/types.hpp"

namespace psdml {

struct StftConfig {
  double window_ms = 32.0;
  double overlap = 0.75;
  double sample_rate = 16000.0;

  int fft_size() const;
  int hop() const;
  int bins() const { return fft_size() / 2 + 1; }
  /// Throws InvalidArgument unless the window sums to a constant at this hop.
  void validate() const;
};

/// Samples are n_samples x n_channels.
struct Audio {
  double sample_rate = 16000.0;
  RMatrix samples;
  int channels() const { return static_cast<int>(samples.cols()); }
  Eigen::Index length() const { return samples.rows(); }
};

/// data[(frame * bins + bin) * channels + channel]
class StftTensor {
 public:
  StftTensor() = default;
  StftTensor(int channels, int frames, int bins);

  int channels() const { return channels_; }
  int frames() const { return frames_; }
  int bins() const { return bins_; }

  cdouble& at(int channel, int frame, int bin) {
    return data_[(static_cast<std::size_t>(frame) * bins_ + bin) * channels_ + channel];
  }
  cdouble at(int channel, int frame, int bin) const {
    return data_[(static_cast<std::size_t>(frame) * bins_ + bin) * channels_ + channel];
  }
  /// Channel vector of one time-frequency cell.
  Eigen::Map<const CVector> cell(int frame, int bin) const {
    return Eigen::Map<const CVector>(&data_[(static_cast<std::size_t>(frame) * bins_ + bin) * channels_],
                                     channels_);
  }
  Eigen::Map<CVector> cell(int frame, int bin) {
    return Eigen::Map<CVector>(&data_[(static_cast<std::size_t>(frame) * bins_ + bin) * channels_], channels_);
  }

 private:
  int channels_ = 0;
  int frames_ = 0;
  int bins_ = 0;
  std::vector<cdouble> data_;
};

/// Periodic square-root Hann window of length n.
RVector sqrt_hann(int n);

/// Number of frames used for a signal of the given length.
int stft_frame_count(Eigen::Index n_samples, const StftConfig& config);

StftTensor stft(const Audio& audio, const StftConfig& config);

/// Inverse with overlap-add; returns `length` samples per channel.
Audio istft(const StftTensor& spec, const StftConfig& config, Eigen::Index length);

}  // namespace psdml
