#include <doctest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "psdml/kernels.hpp"

using namespace psdml;

namespace {

std::vector<double> random_doubles(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar kernels match naive Eigen expressions") {
  std::mt19937_64 rng(3);
  const auto& k = kernels::table(kernels::Isa::kScalar);
  for (int n : {1, 3, 8}) {
    CMatrix r = oracle::random_hpd(rng, n);
    const CVector y = oracle::random_cmatrix(rng, n, 1);
    const CMatrix expect = 0.7 * r + 0.3 * y * y.adjoint();
    k.herm_rank1(r.data(), n, y.data(), 0.7, 0.3);
    CHECK(oracle::rel(r, expect) < 1e-15);
  }
  const auto x = random_doubles(rng, 37);
  const auto w = random_doubles(rng, 37);
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * w[i];
  CHECK(k.real_dot(x.data(), w.data(), x.size()) == doctest::Approx(dot).epsilon(1e-15));
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
  if (!kernels::available(kernels::Isa::kAvx2)) {
    MESSAGE("AVX2 not available on this machine; equivalence test skipped");
    return;
  }
  const auto& ref = kernels::table(kernels::Isa::kScalar);
  const auto& simd = kernels::table(kernels::Isa::kAvx2);
  std::mt19937_64 rng(11);

  SUBCASE("rank-one Hermitian update, odd and even sizes") {
    for (int n = 1; n <= 17; ++n) {
      const CMatrix r0 = oracle::random_hpd(rng, n);
      const CVector y = oracle::random_cmatrix(rng, n, 1);
      CMatrix a = r0;
      CMatrix b = r0;
      ref.herm_rank1(a.data(), n, y.data(), 0.7, 0.3);
      simd.herm_rank1(b.data(), n, y.data(), 0.7, 0.3);
      CHECK(oracle::rel(b, a) < 1e-14);
    }
  }
  SUBCASE("real dot product") {
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 64u, 129u, 1000u}) {
      const auto x = random_doubles(rng, n);
      const auto y = random_doubles(rng, n);
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(x[i] * y[i]);
      const double a = ref.real_dot(x.data(), y.data(), n);
      const double b = simd.real_dot(x.data(), y.data(), n);
      CHECK(std::abs(a - b) <= 1e-14 * std::max(scale, 1.0));
    }
  }
  SUBCASE("elementwise multiply and multiply-add") {
    for (std::size_t n : {1u, 5u, 8u, 13u, 257u}) {
      const auto w = random_doubles(rng, n);
      const auto x = random_doubles(rng, n);
      auto base = random_doubles(rng, n);
      std::vector<double> a(n), b(n);
      ref.mul(a.data(), w.data(), x.data(), n);
      simd.mul(b.data(), w.data(), x.data(), n);
      CHECK(a == b);
      a = base;
      b = base;
      ref.mul_add(a.data(), w.data(), x.data(), n);
      simd.mul_add(b.data(), w.data(), x.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-15 * (std::abs(a[i]) + 1.0));
    }
  }
}

TEST_CASE("re_trace_product equals Re Tr[R K]") {
  std::mt19937_64 rng(5);
  const CMatrix r = oracle::random_hpd(rng, 6);
  const CMatrix k = oracle::random_hpd(rng, 6);
  CHECK(kernels::re_trace_product(r, k) == doctest::Approx((r * k).trace().real()).epsilon(1e-13));
  CHECK_THROWS_AS(kernels::re_trace_product(r, CMatrix::Identity(5, 5)), InvalidArgument);
}

TEST_CASE("active table is a valid ISA") {
  const auto& t = kernels::active();
  CHECK(kernels::available(t.isa));
  CHECK_FALSE(kernels::isa_name(t.isa).empty());
}
