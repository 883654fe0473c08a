#include "kernels_impl.hpp"

namespace psdml::kernels::detail {

void herm_rank1_scalar(cdouble* r, std::size_t n, const cdouble* y, double a, double b) {
  for (std::size_t j = 0; j < n; ++j) {
    const cdouble c = b * std::conj(y[j]);
    cdouble* col = r + j * n;
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = a * col[i] + y[i] * c;
    }
  }
}

double real_dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void mul_scalar(double* out, const double* w, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = w[i] * x[i];
}

void mul_add_scalar(double* out, const double* w, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += w[i] * x[i];
}

}  // namespace psdml::kernels::detail
