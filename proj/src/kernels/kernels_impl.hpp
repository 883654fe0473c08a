#pragma once

#include <complex>
#include <cstddef>

// Deliberately free of Eigen: the AVX2 translation unit includes this header.

namespace psdml::kernels::detail {

using cdouble = std::complex<double>;

void herm_rank1_scalar(cdouble* r, std::size_t n, const cdouble* y, double a, double b);
double real_dot_scalar(const double* x, const double* y, std::size_t n);
void mul_scalar(double* out, const double* w, const double* x, std::size_t n);
void mul_add_scalar(double* out, const double* w, const double* x, std::size_t n);

#if defined(PSDML_HAVE_AVX2)
void herm_rank1_avx2(cdouble* r, std::size_t n, const cdouble* y, double a, double b);
double real_dot_avx2(const double* x, const double* y, std::size_t n);
void mul_avx2(double* out, const double* w, const double* x, std::size_t n);
void mul_add_avx2(double* out, const double* w, const double* x, std::size_t n);
#endif

}  // namespace psdml::kernels::detail
