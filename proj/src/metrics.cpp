#include "psdml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace psdml {

namespace {

constexpr int kBands = 25;
constexpr int kLpcOrder = 10;

struct Framing {
  int length = 0;
  int hop = 0;
  RVector window;
};

Framing framing(double sample_rate) {
  Framing f;
  f.length = static_cast<int>(std::lround(0.030 * sample_rate));
  f.hop = std::max(f.length / 4, 1);
  f.window.resize(f.length);
  for (int i = 0; i < f.length; ++i) {
    f.window(i) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (f.length - 1));
  }
  return f;
}

Eigen::Index checked_length(const RVector& a, const RVector& b, double sample_rate) {
  if (!(sample_rate > 0.0)) throw InvalidArgument("metrics: sample rate must be positive");
  if (std::abs(a.size() - b.size()) > kMetricLengthTolerance) {
    throw InvalidArgument("metrics: signal lengths differ by more than " +
                          std::to_string(kMetricLengthTolerance) + " samples");
  }
  const Eigen::Index n = std::min(a.size(), b.size());
  if (n < framing(sample_rate).length) throw InvalidArgument("metrics: signals shorter than one frame");
  return n;
}

int frame_count(Eigen::Index n, const Framing& f) {
  return static_cast<int>((n - f.length) / f.hop + 1);
}

double mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_inv(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

double fwsnrseg(const RVector& reference, const RVector& processed, double sample_rate) {
  const Eigen::Index n = checked_length(reference, processed, sample_rate);
  const Framing f = framing(sample_rate);
  int nfft = 1;
  while (nfft < 2 * f.length) nfft *= 2;

  // Band edges in FFT bins.
  std::vector<int> edges(kBands + 1);
  const double lo = mel(50.0);
  const double hi = mel(sample_rate / 2.0);
  for (int b = 0; b <= kBands; ++b) {
    const double hz = mel_inv(lo + (hi - lo) * b / kBands);
    edges[static_cast<std::size_t>(b)] = std::clamp(static_cast<int>(std::lround(hz * nfft / sample_rate)), 0, nfft / 2 + 1);
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  const int frames = frame_count(n, f);
  std::vector<double> energy(static_cast<std::size_t>(frames));
  for (int m = 0; m < frames; ++m) {
    energy[static_cast<std::size_t>(m)] = reference.segment(static_cast<Eigen::Index>(m) * f.hop, f.length).squaredNorm();
  }
  const double max_energy = *std::max_element(energy.begin(), energy.end());
  if (!(max_energy > 0.0)) throw InvalidArgument("fwsnrseg: reference signal is silent");

  std::vector<double> bx(nfft), by(nfft);
  std::vector<cdouble> sx, sy;
  double total = 0.0;
  int used = 0;
  for (int m = 0; m < frames; ++m) {
    if (energy[static_cast<std::size_t>(m)] < max_energy * 1e-4) continue;
    std::fill(bx.begin(), bx.end(), 0.0);
    std::fill(by.begin(), by.end(), 0.0);
    const Eigen::Index start = static_cast<Eigen::Index>(m) * f.hop;
    for (int i = 0; i < f.length; ++i) {
      bx[static_cast<std::size_t>(i)] = f.window(i) * reference(start + i);
      by[static_cast<std::size_t>(i)] = f.window(i) * processed(start + i);
    }
    fft.fwd(sx, bx);
    fft.fwd(sy, by);
    double num = 0.0;
    double den = 0.0;
    for (int b = 0; b < kBands; ++b) {
      double px = 0.0;
      double py = 0.0;
      for (int k = edges[static_cast<std::size_t>(b)]; k < edges[static_cast<std::size_t>(b) + 1]; ++k) {
        px += std::norm(sx[static_cast<std::size_t>(k)]);
        py += std::norm(sy[static_cast<std::size_t>(k)]);
      }
      const double x = std::sqrt(px);
      const double y = std::sqrt(py);
      const double w = std::pow(x, 0.2);
      if (w == 0.0) continue;
      const double err = (x - y) * (x - y);
      const double snr = err > 0.0 ? 10.0 * std::log10(x * x / err) : kFwSnrCeiling;
      num += w * std::clamp(snr, kFwSnrFloor, kFwSnrCeiling);
      den += w;
    }
    if (den > 0.0) {
      total += num / den;
      ++used;
    }
  }
  return used > 0 ? total / used : kFwSnrFloor;
}

RVector lpc(const RVector& frame, int order) {
  if (order < 1 || frame.size() <= order) throw InvalidArgument("lpc: frame shorter than the order");
  RVector r(order + 1);
  for (int k = 0; k <= order; ++k) r(k) = frame.head(frame.size() - k).dot(frame.tail(frame.size() - k));
  RVector a = RVector::Zero(order + 1);
  a(0) = 1.0;
  if (!(r(0) > 0.0)) return a;
  double err = r(0);
  for (int i = 1; i <= order; ++i) {
    double acc = r(i);
    for (int j = 1; j < i; ++j) acc += a(j) * r(i - j);
    const double k = -acc / err;
    RVector prev = a;
    for (int j = 1; j < i; ++j) a(j) = prev(j) + k * prev(i - j);
    a(i) = k;
    err *= (1.0 - k * k);
    if (!(err > 0.0)) break;
  }
  return a;
}

double llr(const RVector& reference, const RVector& processed, double sample_rate) {
  const Eigen::Index n = checked_length(reference, processed, sample_rate);
  const Framing f = framing(sample_rate);
  const int frames = frame_count(n, f);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(frames));
  for (int m = 0; m < frames; ++m) {
    const Eigen::Index start = static_cast<Eigen::Index>(m) * f.hop;
    const RVector x = reference.segment(start, f.length).cwiseProduct(f.window);
    const RVector y = processed.segment(start, f.length).cwiseProduct(f.window);
    if (!(x.squaredNorm() > 0.0)) continue;
    RMatrix rc(kLpcOrder + 1, kLpcOrder + 1);
    RVector ac(kLpcOrder + 1);
    for (int k = 0; k <= kLpcOrder; ++k) ac(k) = x.head(x.size() - k).dot(x.tail(x.size() - k));
    for (int i = 0; i <= kLpcOrder; ++i) {
      for (int j = 0; j <= kLpcOrder; ++j) rc(i, j) = ac(std::abs(i - j));
    }
    const RVector a_c = lpc(x, kLpcOrder);
    const RVector a_p = lpc(y, kLpcOrder);
    const double num = a_p.dot(rc * a_p);
    const double den = a_c.dot(rc * a_c);
    if (!(den > 0.0)) continue;
    values.push_back(std::clamp(std::log(num / den), 0.0, 2.0));
  }
  if (values.empty()) throw InvalidArgument("llr: reference signal is silent");
  std::sort(values.begin(), values.end());
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.95 * values.size())));
  double sum = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum += values[i];
  return sum / static_cast<double>(keep);
}

}  // namespace psdml
