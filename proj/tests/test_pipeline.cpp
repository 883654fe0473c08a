#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "oracles.hpp"
#include "psdml/enhancer.hpp"
#include "psdml/metrics.hpp"
#include "psdml/synth.hpp"
#include "psdml/wav.hpp"

using namespace psdml;

namespace {

Audio white_noise(int channels, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Audio a;
  a.samples.resize(n, channels);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) a.samples(i, c) = nd(rng);
  }
  return a;
}

EnhancerConfig config_for(const SynthConfig& s, Variant v) {
  EnhancerConfig c;
  c.geometry = s.geometry();
  c.doa = s.speaker_doa_deg * std::numbers::pi / 180.0;
  c.noise_seconds = s.noise_seconds;
  c.variant = v;
  return c;
}

SynthConfig short_mixture() {
  SynthConfig s;
  s.speech_seconds = 3.0;
  return s;
}

}  // namespace

TEST_CASE("STFT perfect reconstruction") {
  const StftConfig cfg;
  SUBCASE("white noise") {
    const Audio x = white_noise(3, 16000 + 37, 1);
    const Audio y = istft(stft(x, cfg), cfg, x.length());
    CHECK((y.samples - x.samples).norm() / x.samples.norm() < 1e-6);
  }
  SUBCASE("impulse") {
    Audio x;
    x.samples = RMatrix::Zero(4000, 1);
    x.samples(1234, 0) = 1.0;
    const Audio y = istft(stft(x, cfg), cfg, x.length());
    CHECK((y.samples - x.samples).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("silence") {
    Audio x;
    x.samples = RMatrix::Zero(3000, 2);
    const Audio y = istft(stft(x, cfg), cfg, x.length());
    CHECK(y.samples.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("sample rate mismatch") {
    Audio x = white_noise(1, 1000, 2);
    x.sample_rate = 8000.0;
    CHECK_THROWS_AS(stft(x, cfg), InvalidArgument);
  }
  CHECK(cfg.fft_size() == 512);
  CHECK(cfg.hop() == 128);
}

TEST_CASE("a 1 kHz tone lands in its bin") {
  const StftConfig cfg;
  const int n = cfg.fft_size();
  const int bin = 1000 * n / 16000;
  Audio x;
  x.samples.resize(8000, 1);
  for (Eigen::Index i = 0; i < x.length(); ++i) x.samples(i, 0) = std::cos(2.0 * std::numbers::pi * 1000.0 * i / 16000.0 + 0.3);
  const StftTensor s = stft(x, cfg);
  const int m = s.frames() / 2;

  // Direct DFT of the windowed frame as the oracle.
  const RVector w = sqrt_hann(n);
  const Eigen::Index start = static_cast<Eigen::Index>(m) * cfg.hop() - (n - cfg.hop());
  double total = 0.0, near = 0.0, lib_total = 0.0, lib_near = 0.0;
  for (int k = 0; k <= n / 2; ++k) {
    cdouble acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += w(i) * x.samples(start + i, 0) * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    }
    CHECK(std::abs(acc - s.at(0, m, k)) < 1e-9);
    total += std::norm(acc);
    lib_total += std::norm(s.at(0, m, k));
    if (std::abs(k - bin) <= 1) {
      near += std::norm(acc);
      lib_near += std::norm(s.at(0, m, k));
    }
  }
  CHECK(near / total >= 0.95);
  CHECK(lib_near / lib_total >= 0.95);
}

TEST_CASE("WAV round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  Audio a = white_noise(3, 1000, 3);
  a.samples *= 0.2;
  SUBCASE("16-bit PCM") {
    const auto path = (dir / "psdml_rt16.wav").string();
    write_wav(path, a, WavFormat::kPcm16);
    const auto r = read_wav(path);
    CHECK(r.format == WavFormat::kPcm16);
    CHECK(r.audio.sample_rate == 16000.0);
    REQUIRE(r.audio.channels() == 3);
    CHECK((r.audio.samples - a.samples).cwiseAbs().maxCoeff() <= 1.0 / 32768.0);
    std::remove(path.c_str());
  }
  SUBCASE("32-bit float") {
    const auto path = (dir / "psdml_rtf.wav").string();
    write_wav(path, a, WavFormat::kFloat32);
    const auto r = read_wav(path);
    CHECK(r.format == WavFormat::kFloat32);
    CHECK((r.audio.samples - a.samples).cwiseAbs().maxCoeff() <= 1e-7);
    std::remove(path.c_str());
  }
  SUBCASE("missing or malformed files") {
    CHECK_THROWS_AS(read_wav((dir / "psdml_does_not_exist.wav").string()), IoError);
    const auto path = (dir / "psdml_bad.wav").string();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("definitely not audio", f);
    std::fclose(f);
    CHECK_THROWS_AS(read_wav(path), IoError);
    std::remove(path.c_str());
  }
}

TEST_CASE("objective metrics") {
  const SynthMixture mix = synthesize(short_mixture());
  const RVector& ref = mix.clean;
  SUBCASE("identical signals") {
    CHECK(fwsnrseg(ref, ref, 16000.0) == doctest::Approx(kFwSnrCeiling));
    CHECK(llr(ref, ref, 16000.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("white noise at 0 dB") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    const double sd = std::sqrt(ref.squaredNorm() / static_cast<double>(ref.size()));
    RVector noisy = ref;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += sd * nd(rng);
    const double v = fwsnrseg(ref, noisy, 16000.0);
    MESSAGE("fwSNRseg at 0 dB white noise: " << v);
    CHECK(v < 10.0);
  }
  SUBCASE("LLR is asymmetric and nonnegative") {
    const RVector deg = mix.mixture.samples.col(0);
    const double a = llr(ref, deg, 16000.0);
    const double b = llr(deg, ref, 16000.0);
    CHECK(a > 0.0);
    CHECK(b > 0.0);
    CHECK(a != b);
  }
  SUBCASE("length tolerance") {
    const RVector shorter = ref.head(ref.size() - 100);
    CHECK_NOTHROW(fwsnrseg(ref, shorter, 16000.0));
    const RVector much_shorter = ref.head(ref.size() - 2000);
    CHECK_THROWS_AS(fwsnrseg(ref, much_shorter, 16000.0), InvalidArgument);
  }
}

TEST_CASE("LPC of an AR(2) process") {
  // x[n] = 1.3 x[n-1] - 0.6 x[n-2] + e[n]: the order-2 predictor approaches [1, -1.3, 0.6].
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  RVector x(200000);
  x(0) = nd(rng);
  x(1) = nd(rng);
  for (Eigen::Index i = 2; i < x.size(); ++i) x(i) = 1.3 * x(i - 1) - 0.6 * x(i - 2) + nd(rng);
  const RVector a = lpc(x, 2);
  CHECK(a(0) == 1.0);
  CHECK(a(1) == doctest::Approx(-1.3).epsilon(0.02));
  CHECK(a(2) == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("noise basis learned from a model-matched noise field") {
  // Two directional sources per bin with known steering vectors, no other component.
  const int n = 6;
  const int frames = 200;
  EnhancerConfig cfg;
  cfg.geometry = ArrayGeometry::uniform_linear(n, 0.05);
  const int bins = cfg.stft.bins();
  StftTensor spec(n, frames, bins);
  std::mt19937_64 rng(11);
  std::vector<CMatrix> truth(static_cast<std::size_t>(bins));
  std::vector<double> energy(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    const double f = bin_frequency(k, cfg.stft.fft_size(), 16000.0);
    CMatrix a(n, 2);
    a.col(0) = rdtf_far_field(f, cfg.geometry, -0.9).entries;
    a.col(1) = rdtf_far_field(f, cfg.geometry, 1.1).entries;
    truth[static_cast<std::size_t>(k)] = a;
    const double level = 1.0 / (1.0 + k / 40.0);
    for (int m = 0; m < frames; ++m) {
      spec.cell(m, k) = level * a * oracle::random_cmatrix(rng, 2, 1);
      energy[static_cast<std::size_t>(k)] += spec.cell(m, k).squaredNorm();
    }
  }
  Warnings w;
  const auto models = learn_noise_basis(spec, frames, cfg, &w);
  std::vector<double> sorted = energy;
  std::nth_element(sorted.begin(), sorted.begin() + bins / 2, sorted.end());
  const double median = sorted[static_cast<std::size_t>(bins / 2)];
  int checked = 0;
  for (int k = 1; k < bins; ++k) {
    const auto& m = models[static_cast<std::size_t>(k)];
    if (energy[static_cast<std::size_t>(k)] <= median) continue;
    if (m.fallback) continue;
    // Skip bins where the two steering vectors are nearly parallel: the second
    // source then holds too little of the energy to count as a direction.
    const CMatrix& a = truth[static_cast<std::size_t>(k)];
    Eigen::SelfAdjointEigenSolver<CMatrix> evd(CMatrix(a * a.adjoint()));
    if (evd.eigenvalues()(n - 2) < 0.05 * evd.eigenvalues().sum()) continue;
    CHECK(m.scene.rank == 2);
    if (m.scene.rank == 2) {
      CHECK(oracle::max_principal_angle(m.scene.v, truth[static_cast<std::size_t>(k)]) <= 0.05);
      ++checked;
    }
  }
  CHECK(checked > bins / 4);
}

TEST_CASE("white sensor noise has no low-rank structure") {
  EnhancerConfig cfg;
  cfg.geometry = ArrayGeometry::uniform_linear(5, 0.05);
  const Audio x = white_noise(5, 16000, 13);
  Warnings w;
  const auto models = learn_noise_basis(stft(x, cfg.stft), 100, cfg, &w);
  bool flagged = false;
  for (const auto& s : w) flagged = flagged || s.find("no low-rank") != std::string::npos;
  CHECK(flagged);
}

TEST_CASE("noise segment must be long enough") {
  EnhancerConfig cfg;
  cfg.geometry = ArrayGeometry::uniform_linear(4, 0.05);
  cfg.noise_seconds = 0.2;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.noise_seconds = 1.0;
  const Audio x = white_noise(4, 8000, 17);
  CHECK_THROWS_AS(enhance(x, cfg), InvalidArgument);
}

TEST_CASE("single-cell filter properties") {
  std::mt19937_64 rng(19);
  const auto sc = oracle::random_scene(rng, 6, 2);
  BinModel model;
  model.scene = SceneModel::build(sc.g, sc.v, sc.gamma);
  EnhancerConfig cfg;
  cfg.geometry = ArrayGeometry::uniform_linear(6, 0.05);

  SUBCASE("distortionless response") {
    const CMatrix r = model.scene.population_covariance(0.3, 0.5, oracle::random_psi(rng, 2, 0.5));
    const cdouble s(0.7, -1.2);
    const CVector y = s * sc.g.entries;
    cdouble prev = 0.0;
    double prev_phi = -1.0;
    const auto c = mcwf_cell(y, r, model, cfg, prev, prev_phi);
    CHECK(std::abs(c.value / c.gain - s) < 1e-10);
  }
  SUBCASE("very strong speech passes the MVDR output") {
    const CMatrix r = model.scene.population_covariance(1e9, 0.5, oracle::random_psi(rng, 2, 0.5));
    const CVector y = oracle::random_cmatrix(rng, 6, 1);
    for (Variant v : {Variant::kNbDir, Variant::kBbDir}) {
      cfg.variant = v;
      cdouble prev = 0.0;
      double prev_phi = -1.0;
      const auto c = mcwf_cell(y, r, model, cfg, prev, prev_phi);
      CHECK(c.gain == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("silence") {
    cdouble prev = 0.0;
    double prev_phi = -1.0;
    const auto c = mcwf_cell(CVector::Zero(6), CMatrix::Zero(6, 6), model, cfg, prev, prev_phi);
    CHECK(c.value == cdouble(0.0));
  }
  SUBCASE("gain stays within the floor and one") {
    const double floor = std::pow(10.0, -15.0 / 20.0);
    for (Variant v : {Variant::kNbDir, Variant::kBbDir, Variant::kNbDd, Variant::kBbDd}) {
      cfg.variant = v;
      cdouble prev = 0.0;
      double prev_phi = -1.0;
      for (int k = 0; k < 20; ++k) {
        const CMatrix r = sample_cov(oracle::random_cmatrix(rng, 6, 8)).matrix;
        const auto c = mcwf_cell(oracle::random_cmatrix(rng, 6, 1), r, model, cfg, prev, prev_phi);
        CHECK(c.gain >= floor * (1.0 - 1e-15));
        CHECK(c.gain <= 1.0);
      }
    }
  }
}

TEST_CASE("enhancement of a synthetic mixture") {
  const SynthConfig s = short_mixture();
  const SynthMixture mix = synthesize(s);
  const RVector ref_in = mix.mixture.samples.col(0);
  const double base = fwsnrseg(mix.clean, ref_in, 16000.0);

  std::vector<RVector> outputs;
  for (Variant v : {Variant::kNbDir, Variant::kBbDir, Variant::kNbDd, Variant::kBbDd}) {
    const auto res = enhance(mix.mixture, config_for(s, v));
    REQUIRE(res.output.length() == mix.mixture.length());
    const RVector out = res.output.samples.col(0);
    const double score = fwsnrseg(mix.clean, out, 16000.0);
    MESSAGE(variant_name(v) << ": fwSNRseg " << score << " vs " << base << " at the reference microphone");
    CHECK(score > base);
    outputs.push_back(out);
  }
  const double peak = outputs[2].cwiseAbs().maxCoeff();
  CHECK((outputs[2] - outputs[3]).cwiseAbs().maxCoeff() <= 1e-9 * peak);
  CHECK((outputs[0] - outputs[1]).cwiseAbs().maxCoeff() > 1e-6 * outputs[0].cwiseAbs().maxCoeff());
}

TEST_CASE("noise-only input is never amplified") {
  SynthConfig s = short_mixture();
  const SynthMixture mix = synthesize(s);
  Audio noise_only = mix.mixture;
  // Keep only the preamble, repeated to give the filter something to run on.
  const Eigen::Index n0 = mix.noise_samples;
  noise_only.samples = mix.mixture.samples.topRows(n0).replicate(2, 1);
  EnhancerConfig cfg = config_for(s, Variant::kNbDir);
  const auto res = enhance(noise_only, cfg);
  CHECK(res.output.samples.squaredNorm() <= noise_only.samples.col(0).squaredNorm());
}

TEST_CASE("all-zero input gives all-zero output") {
  EnhancerConfig cfg;
  cfg.geometry = ArrayGeometry::uniform_linear(4, 0.05);
  Audio x;
  x.samples = RMatrix::Zero(24000, 4);
  const auto res = enhance(x, cfg);
  CHECK(res.output.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("enhancer output does not depend on the thread count") {
  SynthConfig s = short_mixture();
  s.speech_seconds = 1.0;
  const SynthMixture mix = synthesize(s);
  EnhancerConfig c1 = config_for(s, Variant::kBbDir);
  c1.threads = 1;
  EnhancerConfig c3 = c1;
  c3.threads = 3;
  const auto a = enhance(mix.mixture, c1);
  const auto b = enhance(mix.mixture, c3);
  CHECK((a.output.samples - b.output.samples).cwiseAbs().maxCoeff() == 0.0);
}
