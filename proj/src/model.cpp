#include "psdml/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace psdml {

namespace {

bool all_finite(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

}  // namespace

ArrayGeometry ArrayGeometry::uniform_linear(int n_mics, double spacing_m, double sound_speed,
                                            double sample_rate) {
  ArrayGeometry g;
  g.sound_speed = sound_speed;
  g.sample_rate = sample_rate;
  g.mic_positions.reserve(static_cast<std::size_t>(std::max(n_mics, 0)));
  for (int n = 0; n < n_mics; ++n) g.mic_positions.push_back({n * spacing_m, 0.0, 0.0});
  return g;
}

double ArrayGeometry::distance(int i, int j) const {
  const auto& a = mic_positions.at(static_cast<std::size_t>(i));
  const auto& b = mic_positions.at(static_cast<std::size_t>(j));
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

void ArrayGeometry::validate() const {
  if (size() < 3) throw InvalidArgument("array geometry needs at least 3 microphones");
  if (!(sound_speed > 0.0) || !std::isfinite(sound_speed)) {
    throw InvalidArgument("sound speed must be positive and finite");
  }
  for (const auto& p : mic_positions) {
    if (!all_finite({p[0], p[1], p[2]})) throw InvalidArgument("non-finite microphone position");
  }
}

SteeringVector rdtf_ula(double frequency_hz, double spacing_m, double doa_rad, int n_mics,
                        double sound_speed) {
  if (!all_finite({frequency_hz, spacing_m, doa_rad, sound_speed})) {
    throw InvalidArgument("rdtf_ula: non-finite input");
  }
  if (n_mics < 3) throw InvalidArgument("rdtf_ula: need at least 3 microphones");
  if (!(sound_speed > 0.0)) throw InvalidArgument("rdtf_ula: sound speed must be positive");
  SteeringVector g{CVector(n_mics)};
  const double step = spacing_m * std::sin(doa_rad) / sound_speed;
  g.entries(0) = cdouble(1.0, 0.0);
  for (int n = 1; n < n_mics; ++n) {
    g.entries(n) = std::polar(1.0, -2.0 * std::numbers::pi * frequency_hz * step * n);
  }
  return g;
}

SteeringVector rdtf_far_field(double frequency_hz, const ArrayGeometry& geometry, double doa_rad) {
  geometry.validate();
  if (!all_finite({frequency_hz, doa_rad})) throw InvalidArgument("rdtf_far_field: non-finite input");
  const int n_mics = geometry.size();
  const double ux = std::sin(doa_rad);
  const double uy = std::cos(doa_rad);
  const auto& p0 = geometry.mic_positions.front();
  SteeringVector g{CVector(n_mics)};
  g.entries(0) = cdouble(1.0, 0.0);
  for (int n = 1; n < n_mics; ++n) {
    const auto& p = geometry.mic_positions[static_cast<std::size_t>(n)];
    const double tau = ((p[0] - p0[0]) * ux + (p[1] - p0[1]) * uy) / geometry.sound_speed;
    g.entries(n) = std::polar(1.0, -2.0 * std::numbers::pi * frequency_hz * tau);
  }
  return g;
}

CoherenceMatrix diffuse_coherence(double frequency_hz, const ArrayGeometry& geometry,
                                  double loading) {
  geometry.validate();
  if (!(frequency_hz >= 0.0) || !std::isfinite(frequency_hz)) {
    throw InvalidArgument("diffuse_coherence: frequency must be finite and >= 0");
  }
  if (!(loading >= 0.0 && loading < 1.0)) {
    throw InvalidArgument("diffuse_coherence: loading must lie in [0, 1)");
  }
  const int n = geometry.size();
  CoherenceMatrix out;
  RMatrix gamma(n, n);
  const double k = 2.0 * std::numbers::pi * frequency_hz / geometry.sound_speed;
  for (int i = 0; i < n; ++i) {
    gamma(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double d = geometry.distance(i, j);
      if (d == 0.0) {
        out.warnings.push_back("microphones " + std::to_string(i) + " and " + std::to_string(j) +
                               " share a position");
      }
      gamma(i, j) = gamma(j, i) = sinc(k * d);
    }
  }
  gamma = (1.0 - loading) * gamma + loading * RMatrix::Identity(n, n);
  out.entries = gamma.cast<cdouble>();
  return out;
}

namespace {

int peak_index(const CVector& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  // Earliest index among entries equal to the maximum up to roundoff.
  const double peak = std::abs(v(idx));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= peak * (1.0 - 1e-12)) return static_cast<int>(i);
  }
  return static_cast<int>(idx);
}

}  // namespace

NoiseSubspace noise_subspace(const CMatrix& noise_cov, int rank) {
  const auto n = noise_cov.rows();
  if (noise_cov.cols() != n) throw InvalidArgument("noise_subspace: covariance must be square");
  if (rank < 0 || rank > n - 2) {
    throw InvalidArgument("noise_subspace: rank must lie in [0, N-2]");
  }
  NoiseSubspace out;
  out.basis.resize(n, rank);
  out.eigenvalues.resize(rank);
  if (rank == 0) return out;

  Eigen::SelfAdjointEigenSolver<CMatrix> evd(hermitian_part(noise_cov));
  if (evd.info() != Eigen::Success) throw NumericError("noise_subspace: eigendecomposition failed");
  const RVector& values = evd.eigenvalues();  // ascending
  const CMatrix& vectors = evd.eigenvectors();

  const double scale = std::max(values.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double tie_tol = 1e-10 * scale;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> peaks(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) peaks[static_cast<std::size_t>(i)] = peak_index(vectors.col(i));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double va = values(a);
    const double vb = values(b);
    if (std::abs(va - vb) > tie_tol) return va > vb;
    return peaks[static_cast<std::size_t>(a)] < peaks[static_cast<std::size_t>(b)];
  });

  for (int t = 0; t < rank; ++t) {
    const int src = order[static_cast<std::size_t>(t)];
    CVector v = vectors.col(src);
    const cdouble pivot = v(peak_index(v));
    v *= std::conj(pivot) / std::abs(pivot);
    v(peak_index(v)) = cdouble(v(peak_index(v)).real(), 0.0);
    out.basis.col(t) = v;
    out.eigenvalues(t) = values(src);
  }
  if (rank < n) {
    const double kept = values(order[static_cast<std::size_t>(rank - 1)]);
    const double dropped = values(order[static_cast<std::size_t>(rank)]);
    if (std::abs(kept - dropped) <= tie_tol) {
      out.warnings.push_back("noise subspace not unique: eigenvalues " + std::to_string(rank) +
                             " and " + std::to_string(rank + 1) + " coincide");
    }
  }
  return out;
}

int select_rank(const CMatrix& noise_cov, double energy, Warnings* warnings) {
  const auto n = noise_cov.rows();
  if (noise_cov.cols() != n || n < 3) throw InvalidArgument("select_rank: need a square N >= 3 matrix");
  if (!(energy > 0.0 && energy <= 1.0)) throw InvalidArgument("select_rank: energy must lie in (0, 1]");
  Eigen::SelfAdjointEigenSolver<CMatrix> evd(hermitian_part(noise_cov), Eigen::EigenvaluesOnly);
  RVector values = evd.eigenvalues().reverse().cwiseMax(0.0);
  const double total = values.sum();
  const int cap = static_cast<int>(n) - 2;
  if (!(total > 0.0)) {
    if (warnings != nullptr) warnings->push_back("noise covariance is zero; rank set to 0");
    return 0;
  }
  double acc = 0.0;
  int needed = static_cast<int>(n);
  for (int t = 0; t < n; ++t) {
    acc += values(t);
    if (acc >= energy * total) {
      needed = t + 1;
      break;
    }
  }
  if (needed > cap) {
    if (warnings != nullptr) {
      warnings->push_back("noise covariance shows no low-rank structure (needs rank " +
                          std::to_string(needed) + "); capped at N-2");
    }
    return cap;
  }
  return needed;
}

BlockingMatrix blocking_matrix(const SteeringVector& g) {
  const auto n = g.entries.size();
  if (n < 2 || g.entries.norm() == 0.0) throw InvalidArgument("blocking_matrix: g must be nonzero");
  Eigen::HouseholderQR<CMatrix> qr(CMatrix(g.entries));
  CMatrix q = qr.householderQ();
  return BlockingMatrix{q.rightCols(n - 1)};
}

}  // namespace psdml
