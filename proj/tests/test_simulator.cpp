#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "psdml/bounds.hpp"
#include "psdml/simulator.hpp"

using namespace psdml;

TEST_CASE("scene generation") {
  ScenarioConfig c;
  TrialRng rng(5, 0);
  const SimScene s = gen_scene(c, rng);
  SUBCASE("noise covariance has rank T and the requested Frobenius norm") {
    const CMatrix phi_u = s.noise_covariance();
    CHECK(phi_u.norm() == doctest::Approx(c.p_u).epsilon(1e-9));
    Eigen::SelfAdjointEigenSolver<CMatrix> evd(phi_u);
    const RVector ev = evd.eigenvalues();
    const double tr = phi_u.trace().real();
    int nonzero = 0;
    for (int i = 0; i < ev.size(); ++i) {
      if (std::abs(ev(i)) > 1e-10 * tr) ++nonzero;
    }
    CHECK(nonzero == c.rank);
  }
  SUBCASE("same seed gives the same scene") {
    TrialRng again(5, 0);
    const SimScene t = gen_scene(c, again);
    CHECK((t.a_u - s.a_u).norm() == 0.0);
    CHECK((t.psi_u - s.psi_u).norm() == 0.0);
    TrialRng other(5, 1);
    CHECK((gen_scene(c, other).a_u - s.a_u).norm() > 0.0);
  }
}

TEST_CASE("noise basis learning") {
  ScenarioConfig c;
  SUBCASE("noise-only training recovers the span of A_u") {
    TrialRng rng(11, 3);
    const SimScene s = gen_scene(c, rng);
    const auto v = learn_v(s, c, rng, 500);
    CHECK(oracle::max_principal_angle(v.basis, s.a_u) <= 1e-6);
  }
  SUBCASE("rank one") {
    c.rank = 1;
    TrialRng rng(11, 4);
    const SimScene s = gen_scene(c, rng);
    const auto v = learn_v(s, c, rng, 50);
    const CVector a = s.a_u.col(0) / s.a_u.col(0).norm();
    CHECK(std::abs(std::abs(a.dot(v.basis.col(0))) - 1.0) < 1e-10);
  }
  SUBCASE("too few samples") {
    TrialRng rng(11, 5);
    const SimScene s = gen_scene(c, rng);
    CHECK_THROWS_AS(learn_v(s, c, rng, 1), InvalidArgument);
  }
}

TEST_CASE("snapshot statistics") {
  ScenarioConfig c;
  TrialRng rng(13, 0);
  const SimScene s = gen_scene(c, rng);
  SUBCASE("sample covariance converges to the model") {
    const int draws = 1000000;
    CMatrix acc = CMatrix::Zero(c.n_mics, c.n_mics);
    CVector mean = CVector::Zero(c.n_mics);
    for (int k = 0; k < draws; ++k) {
      const CVector y = draw_snapshot(s, c.phi_s, c.phi_r, rng);
      acc.noalias() += y * y.adjoint();
      mean += y;
    }
    acc /= draws;
    mean /= draws;
    const CMatrix model =
        c.phi_s * s.g.entries * s.g.entries.adjoint() + c.phi_r * s.gamma + s.noise_covariance();
    CHECK(oracle::rel(acc, model) < 0.01);
    const double sigma = std::sqrt(model.trace().real());
    CHECK(mean.norm() <= 5.0 * sigma / std::sqrt(static_cast<double>(draws)));
  }
  SUBCASE("all-zero powers give a zero snapshot") {
    SimScene silent = s;
    silent.m.setZero();
    CHECK(draw_snapshot(silent, 0.0, 0.0, rng).norm() == 0.0);
  }
}

TEST_CASE("trial equivalence and determinism") {
  ScenarioConfig c;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto a = run_trial(c, k);
    CHECK(a.equivalence_diff <= 1e-10);
    const auto b = run_trial(c, k);
    CHECK(a.nonblocking.phi_r_raw == b.nonblocking.phi_r_raw);
    CHECK(a.err_psi_mean == b.err_psi_mean);
  }
}

TEST_CASE("grid points vary only the named parameter") {
  ScenarioConfig c;
  c.sweep = SweepParam::kSrr;
  auto p = at_grid_point(c, 10.0);
  CHECK(10.0 * std::log10(p.phi_s / p.phi_r) == doctest::Approx(10.0));
  CHECK(p.phi_s == c.phi_s);
  CHECK(p.p_u == c.p_u);
  c.sweep = SweepParam::kSrnr;
  p = at_grid_point(c, -5.0);
  CHECK(10.0 * std::log10(p.phi_s / (p.phi_r + p.p_u)) == doctest::Approx(-5.0));
  CHECK(p.phi_r == c.phi_r);
  c.sweep = SweepParam::kSnr;
  p = at_grid_point(c, 20.0);
  CHECK(10.0 * std::log10(p.phi_s / p.p_u) == doctest::Approx(20.0));
  c.sweep = SweepParam::kSnapshots;
  CHECK(at_grid_point(c, 50.0).snapshots == 50);
  CHECK_THROWS_AS(at_grid_point(c, 12.5), InvalidArgument);
}

TEST_CASE("sweep CSV") {
  ScenarioConfig c;
  c.trials = 20;
  c.threads = 1;
  c.sweep = SweepParam::kSnapshots;
  c.grid = {25, 50, 100, 200, 400};
  const auto res = run_sweep(c);
  std::ostringstream a;
  write_sweep_csv(a, res.rows);
  const std::string text = a.str();
  CHECK(text.rfind("sweep_param,value,nmse_phiR_nb,nmse_phiR_bb,nmse_phiS,nmse_psi_mean,crb_phiR,crb_phiS,"
                   "crb_psi_mean,trials,seed\n",
                   0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  CHECK(res.rows[2].crb_phi_r == doctest::Approx(2.0e-3).epsilon(1e-12));
  CHECK(res.max_equivalence_diff <= 1e-10);

  SUBCASE("thread count does not change the output") {
    ScenarioConfig c3 = c;
    c3.threads = 3;
    std::ostringstream b;
    write_sweep_csv(b, run_sweep(c3).rows);
    CHECK(b.str() == text);
  }
}

TEST_CASE("pairwise sum") {
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 / (1.0 + static_cast<double>(i));
  long double ref = 0.0L;
  for (double v : x) ref += v;
  CHECK(pairwise_sum(x.data(), x.size()) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-15));
  CHECK(pairwise_sum(x.data(), 0) == 0.0);
}

TEST_CASE("Monte-Carlo variance of the reverberation estimator matches the bound") {
  ScenarioConfig c;
  c.trials = 1000;
  c.threads = 1;
  const auto row = run_point(c, 0.0);
  CHECK(row.crb_phi_r == doctest::Approx(2.0e-3).epsilon(1e-12));
  CHECK(row.nmse_phi_r_nb >= 0.85 * 2.0e-3);
  CHECK(row.nmse_phi_r_nb <= 1.15 * 2.0e-3);
  CHECK(row.nmse_phi_r_nb == doctest::Approx(row.nmse_phi_r_bb).epsilon(1e-8));
}

TEST_CASE("bounds grid") {
  ScenarioConfig c;
  c.threads = 1;
  c.sweep = SweepParam::kSnapshots;
  c.grid = {50, 100};
  const auto rows = run_bounds(c, 8, true);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].crb_phi_r == doctest::Approx(2.0e-3).epsilon(1e-12));
  CHECK(rows[0].crb_phi_s == doctest::Approx(2.0 * rows[1].crb_phi_s).epsilon(1e-10));
  for (const auto& r : rows) CHECK(r.fim_max_rel_diff <= 1e-6);
  std::ostringstream out;
  write_bounds_csv(out, rows);
  CHECK(out.str().find("fim_max_rel_diff") != std::string::npos);
  CHECK_THROWS_AS(run_bounds(c, 0, false), InvalidArgument);
}

TEST_CASE("scenario validation") {
  ScenarioConfig c;
  c.rank = 7;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.rank = 2;
  c.n_training = 1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_THROWS_AS(parse_sweep_param("bogus"), InvalidArgument);
  CHECK(parse_sweep_param("L") == SweepParam::kSnapshots);
}
