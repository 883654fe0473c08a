#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "psdml/bounds.hpp"

using namespace psdml;

TEST_CASE("reverberation variance") {
  CHECK(var_phi_r(0.5, 100, 8, 2) == doctest::Approx(5.0e-4).epsilon(1e-14));
  CHECK(var_phi_r(0.5, 100, 8, 2) / 0.25 == doctest::Approx(2.0e-3).epsilon(1e-14));
  CHECK(var_phi_r(0.7, 40, 6, 0) == doctest::Approx(0.49 / (40.0 * 5.0)).epsilon(1e-14));
  CHECK(var_phi_r(0.0, 100, 8, 2) == 0.0);
  CHECK_THROWS_AS(var_phi_r(1.0, 100, 4, 3), InvalidArgument);
  CHECK_THROWS_AS(var_phi_r(1.0, 0, 8, 2), InvalidArgument);
}

TEST_CASE("noise variance") {
  CHECK(var_psi_i(1.0, 1.0, 100, 8, 2) == doctest::Approx(0.042).epsilon(1e-14));
  CHECK(var_psi_i(0.0, 1.0, 100, 8, 2) == 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(var_psi_i(2.0, inf, 100, 8, 2) == doctest::Approx(4.0 / 100).epsilon(1e-14));
  CHECK(var_psi_i(2.0, 1e9, 100, 8, 2) == doctest::Approx(4.0 / 100).epsilon(1e-8));
  CHECK_THROWS_AS(var_psi_i(1.0, 0.0, 100, 8, 2), InvalidArgument);
  CHECK_THROWS_AS(var_psi_i(1.0, -1.0, 100, 8, 2), InvalidArgument);
}

TEST_CASE("speech variance") {
  CHECK(var_phi_s(2.0, 2.0, 50, 6, 1) == doctest::Approx(0.185).epsilon(1e-14));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(var_phi_s(3.0, inf, 10, 6, 1) == doctest::Approx(0.9).epsilon(1e-14));
  // No noise: (phi_S^2 / L) [((1+e)/e)^2 + 1/((N-1) e^2)].
  CHECK(var_phi_s(1.0, 0.5, 20, 5, 0) == doctest::Approx((9.0 + 1.0) / 20.0).epsilon(1e-14));
}

TEST_CASE("output power ratios") {
  std::mt19937_64 rng(107);
  SUBCASE("both forms agree") {
    for (int trial = 0; trial < 20; ++trial) {
      const int t = 1 + trial % 3;
      const auto sc = oracle::random_scene(rng, 7, t);
      const auto s = SceneModel::build(sc.g, sc.v, sc.gamma);
      for (int i = 0; i < t; ++i) {
        CHECK(oracle::rel(xi_i_projection(0.8, 0.3, s, i), xi_i(0.8, 0.3, s, i)) < 1e-10);
      }
      CHECK(oracle::rel(epsilon_projection(0.8, 0.3, s), epsilon(0.8, 0.3, s)) < 1e-10);
    }
  }
  SUBCASE("linear in 1/phi_R") {
    const auto sc = oracle::random_scene(rng, 6, 2);
    const auto s = SceneModel::build(sc.g, sc.v, sc.gamma);
    CHECK(xi_i(1.0, 0.8, s, 1) == doctest::Approx(0.5 * xi_i(1.0, 0.4, s, 1)).epsilon(1e-14));
  }
  SUBCASE("identity coherence, orthogonal speech") {
    SteeringVector g{CVector::Unit(4, 0)};
    CMatrix v = CMatrix::Zero(4, 1);
    v(1, 0) = 1.0;
    const auto s = SceneModel::build(g, v, CMatrix::Identity(4, 4));
    const CVector w1 = s.w_u.col(0);
    CHECK(xi_i(2.0, 0.5, s, 0) == doctest::Approx(2.0 / (0.5 * w1.squaredNorm())).epsilon(1e-14));
    CHECK(xi_i(2.0, 0.5, s, 0) == doctest::Approx(4.0).epsilon(1e-14));
  }
}

TEST_CASE("closed-form CRB equals the estimator variance") {
  std::mt19937_64 rng(109);
  const auto sc = oracle::random_scene(rng, 8, 2);
  const auto s = SceneModel::build(sc.g, sc.v, sc.gamma);
  PsdEstimates truth;
  truth.phi_r = 0.5;
  truth.phi_s = 0.5;
  truth.psi_v = oracle::random_psi(rng, 2, 0.3);
  const auto v = variance_report(s, truth, 100);
  const auto c = crb_closed_form(s, truth, 100);
  CHECK(c.crb_phi_r == var_phi_r(0.5, 100, 8, 2));
  CHECK(c.crb_phi_s == v.var_phi_s);
  CHECK(c.crb_phi_r / 0.25 == doctest::Approx(2.0e-3).epsilon(1e-14));
  const auto c2 = crb_closed_form(s, truth, 200);
  CHECK(c2.crb_phi_r == doctest::Approx(c.crb_phi_r / 2).epsilon(1e-14));
  CHECK(c2.crb_phi_s == doctest::Approx(c.crb_phi_s / 2).epsilon(1e-14));
  CHECK(c2.crb_psi_diag[1] == doctest::Approx(c.crb_psi_diag[1] / 2).epsilon(1e-14));
}

TEST_CASE("numeric Fisher information matches the closed forms") {
  std::mt19937_64 rng(113);
  double worst = 0.0;
  int scenes = 0;
  for (int n : {4, 6, 8}) {
    for (int t : {0, 1, 2}) {
      for (int k = 0; k < 6; ++k) {
        const auto sc = oracle::random_scene(rng, n, t);
        const auto s = SceneModel::build(sc.g, sc.v, sc.gamma);
        PsdEstimates truth;
        truth.phi_r = 0.2 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        truth.phi_s = 0.2 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        truth.psi_v = oracle::random_psi(rng, t, 0.4);
        const double l = 50.0 + 10.0 * k;
        const auto closed = crb_closed_form(s, truth, l);
        const auto fim = fim_numeric(s, truth, l);
        CHECK(fim.fim.rows() == (t + 1) * (t + 1) + 1);
        double e = oracle::rel(fim.crb_phi_r, closed.crb_phi_r);
        e = std::max(e, oracle::rel(fim.crb_phi_s, closed.crb_phi_s));
        for (int i = 0; i < t; ++i) {
          e = std::max(e, oracle::rel(fim.crb_psi_diag[static_cast<std::size_t>(i)],
                                      closed.crb_psi_diag[static_cast<std::size_t>(i)]));
        }
        CHECK(e <= 1e-6);
        worst = std::max(worst, e);
        ++scenes;
      }
    }
  }
  CHECK(scenes >= 50);
  MESSAGE("worst FIM/closed-form gap " << worst << " over " << scenes << " scenes");
}

TEST_CASE("no-noise FIM bound") {
  std::mt19937_64 rng(127);
  const auto sc = oracle::random_scene(rng, 5, 0);
  const auto s = SceneModel::build(sc.g, sc.v, sc.gamma);
  PsdEstimates truth;
  truth.phi_r = 0.6;
  truth.phi_s = 1.1;
  truth.psi_v = CMatrix(0, 0);
  const auto fim = fim_numeric(s, truth, 80);
  CHECK(fim.crb_phi_r == doctest::Approx(0.36 / (80.0 * 4.0)).epsilon(1e-9));
}

TEST_CASE("singular Fisher information reports its rank") {
  std::mt19937_64 rng(131);
  const auto sc = oracle::random_scene(rng, 5, 1);
  // Duplicate the noise direction as the speech direction: A = [g | g] makes the FIM singular.
  SceneModel s = SceneModel::build(sc.g, sc.v, sc.gamma);
  s.v.col(0) = s.g.entries;
  PsdEstimates truth;
  truth.phi_r = 0.5;
  truth.phi_s = 0.5;
  truth.psi_v = CMatrix::Identity(1, 1);
  try {
    fim_numeric(s, truth, 100);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("rank") != std::string::npos);
  }
}

TEST_CASE("analytic derivatives agree with finite differences") {
  std::mt19937_64 rng(137);
  for (int t : {0, 1, 2, 3}) {
    const auto sc = oracle::random_scene(rng, 6, t);
    const auto s = SceneModel::build(sc.g, sc.v, sc.gamma);
    PsdEstimates truth;
    truth.phi_r = 0.7;
    truth.phi_s = 0.4;
    truth.psi_v = oracle::random_psi(rng, t, 0.5);
    CHECK(derivative_check(s, truth) <= 1e-4);
  }
}

TEST_CASE("log-likelihood at the model covariance") {
  std::mt19937_64 rng(139);
  const CMatrix phi = oracle::random_hpd(rng, 4);
  const double logdet = std::log(phi.determinant().real());
  const double expect = 30.0 * (-4.0 * std::log(std::numbers::pi) - logdet - 4.0);
  CHECK(log_likelihood(phi, phi, 30.0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(log_likelihood(phi, CMatrix(-phi), 30.0), InvalidArgument);
}

TEST_CASE("golden-section search") {
  const double best = golden_section_max([](double x) { return -(x - 1.7) * (x - 1.7); }, 0.1, 10.0, 1e-12);
  CHECK(best == doctest::Approx(1.7).epsilon(1e-9));
  CHECK_THROWS_AS(golden_section_max([](double x) { return x; }, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("variance of a Hermitian form of a Gaussian vector") {
  // var(x^H Z x) = Tr[Phi Z Phi Z] for x ~ CN(0, Phi), Hermitian Z.
  std::mt19937_64 rng(149);
  const int n = 4;
  const CMatrix phi = oracle::random_hpd(rng, n);
  const CMatrix zr = oracle::random_cmatrix(rng, n, n);
  const CMatrix z = hermitian_part(zr);
  const CMatrix lower = phi.llt().matrixL();
  const int draws = 100000;
  double mean = 0.0, m2 = 0.0;
  for (int k = 0; k < draws; ++k) {
    const CVector x = lower * oracle::random_cmatrix(rng, n, 1);
    const double q = x.dot(z * x).real();
    const double d = q - mean;
    mean += d / (k + 1);
    m2 += d * (q - mean);
  }
  const double sample_var = m2 / (draws - 1);
  const double theory = (phi * z * phi * z).trace().real();
  CHECK(sample_var == doctest::Approx(theory).epsilon(0.05));
}
