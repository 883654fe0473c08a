// Built with -mavx2 -mfma. Must not include Eigen or any other header whose
// inline functions could be emitted here with the wider ISA.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace psdml::kernels::detail {

void herm_rank1_avx2(cdouble* r, std::size_t n, const cdouble* y, double a, double b) {
  const double* yd = reinterpret_cast<const double*>(y);
  const __m256d av = _mm256_set1_pd(a);
  for (std::size_t j = 0; j < n; ++j) {
    // c = b * conj(y[j]), kept in plain doubles so no std::complex inline
    // code is instantiated under the wider ISA flags.
    const double c_re = b * yd[2 * j];
    const double c_im = -b * yd[2 * j + 1];
    const __m256d cr = _mm256_set1_pd(c_re);
    const __m256d ci = _mm256_set1_pd(c_im);
    double* col = reinterpret_cast<double*>(r + j * n);
    std::size_t i = 0;
    // Two complex entries per register: [re0 im0 re1 im1].
    for (; i + 2 <= n; i += 2) {
      const __m256d yv = _mm256_loadu_pd(yd + 2 * i);
      const __m256d ys = _mm256_permute_pd(yv, 0b0101);
      // even lanes: yr*cr - yi*ci, odd lanes: yi*cr + yr*ci
      const __m256d prod = _mm256_addsub_pd(_mm256_mul_pd(yv, cr), _mm256_mul_pd(ys, ci));
      const __m256d rv = _mm256_loadu_pd(col + 2 * i);
      _mm256_storeu_pd(col + 2 * i, _mm256_fmadd_pd(av, rv, prod));
    }
    for (; i < n; ++i) {
      const double yr = yd[2 * i];
      const double yi = yd[2 * i + 1];
      const double rr = col[2 * i];
      const double ri = col[2 * i + 1];
      col[2 * i] = a * rr + (yr * c_re - yi * c_im);
      col[2 * i + 1] = a * ri + (yi * c_re + yr * c_im);
    }
  }
}

double real_dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d s2 = _mm_add_pd(lo, hi);
  double total = _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

void mul_avx2(double* out, const double* w, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = w[i] * x[i];
}

void mul_add_avx2(double* out, const double* w, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d o = _mm256_loadu_pd(out + i);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i), o));
  }
  for (; i < n; ++i) out[i] += w[i] * x[i];
}

}  // namespace psdml::kernels::detail
