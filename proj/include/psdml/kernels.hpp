#pragma once

// Data-parallel inner loops shared by the estimators, the simulator and the
// STFT. Each kernel has a portable scalar reference and, on x86-64, an AVX2
// variant. The variant is picked once per process from the CPU features; the
// environment variable PSDML_SIMD=scalar forces the reference path.

#include <cstddef>
#include <string_view>

#include "psdml/types.hpp"

namespace psdml::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // R <- a*R + b*y*y^H, R is an n x n column-major complex matrix.
  void (*herm_rank1)(cdouble* r, std::size_t n, const cdouble* y, double a, double b);
  // sum_i x[i]*y[i]
  double (*real_dot)(const double* x, const double* y, std::size_t n);
  // out[i] = w[i]*x[i]
  void (*mul)(double* out, const double* w, const double* x, std::size_t n);
  // out[i] += w[i]*x[i]
  void (*mul_add)(double* out, const double* w, const double* x, std::size_t n);
};

bool available(Isa isa);

/// Table for a specific ISA. Throws InvalidArgument if the CPU or the build
/// lacks it.
const KernelTable& table(Isa isa);

/// Table selected for this process.
const KernelTable& active();

// Eigen-facing conveniences routed through active().

/// R <- a*R + b*y*y^H
void herm_rank1_update(CMatrix& r, const CVector& y, double a, double b);

/// Re Tr[R K] for Hermitian K, computed as the real inner product of the
/// interleaved storage of R and K.
double re_trace_product(const CMatrix& r, const CMatrix& k_hermitian);

}  // namespace psdml::kernels
