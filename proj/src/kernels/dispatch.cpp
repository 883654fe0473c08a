#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "psdml/kernels.hpp"

namespace psdml::kernels {

namespace {

constexpr KernelTable kScalarTable{Isa::kScalar, detail::herm_rank1_scalar, detail::real_dot_scalar,
                                   detail::mul_scalar, detail::mul_add_scalar};

#if defined(PSDML_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Isa::kAvx2, detail::herm_rank1_avx2, detail::real_dot_avx2,
                                 detail::mul_avx2, detail::mul_add_avx2};
#endif

bool cpu_has_avx2() {
#if defined(PSDML_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select() {
  const char* forced = std::getenv("PSDML_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") return kScalarTable;
#if defined(PSDML_HAVE_AVX2)
  if (cpu_has_avx2()) return kAvx2Table;
#endif
  return kScalarTable;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool available(Isa isa) {
  if (isa == Isa::kScalar) return true;
  return isa == Isa::kAvx2 && cpu_has_avx2();
}

const KernelTable& table(Isa isa) {
  if (isa == Isa::kScalar) return kScalarTable;
#if defined(PSDML_HAVE_AVX2)
  if (isa == Isa::kAvx2 && cpu_has_avx2()) return kAvx2Table;
#endif
  throw InvalidArgument("kernel ISA not available: " + std::string(isa_name(isa)));
}

const KernelTable& active() {
  static const KernelTable& chosen = select();
  return chosen;
}

void herm_rank1_update(CMatrix& r, const CVector& y, double a, double b) {
  const auto n = static_cast<std::size_t>(y.size());
  if (r.rows() != y.size() || r.cols() != y.size()) {
    throw InvalidArgument("herm_rank1_update: shape mismatch");
  }
  active().herm_rank1(r.data(), n, y.data(), a, b);
}

double re_trace_product(const CMatrix& r, const CMatrix& k_hermitian) {
  if (r.rows() != k_hermitian.rows() || r.cols() != k_hermitian.cols()) {
    throw InvalidArgument("re_trace_product: shape mismatch");
  }
  const auto count = static_cast<std::size_t>(2 * r.size());
  return active().real_dot(reinterpret_cast<const double*>(r.data()),
                           reinterpret_cast<const double*>(k_hermitian.data()), count);
}

}  // namespace psdml::kernels
