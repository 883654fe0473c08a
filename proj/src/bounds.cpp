#include "psdml/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace psdml {

namespace {

double dof(int n, int t) {
  if (n < 3 || t < 0 || n - 1 - t < 1) throw InvalidArgument("need N - 1 - T >= 1");
  return static_cast<double>(n - 1 - t);
}

void check_count(double l) {
  if (!(l >= 1.0)) throw InvalidArgument("snapshot count must be >= 1");
}

double ratio_variance(double p, double ratio, double l, int n, int t) {
  const double k = dof(n, t);
  check_count(l);
  if (!(ratio > 0.0)) throw InvalidArgument("output power ratio must be positive");
  if (std::isinf(ratio)) return p * p / l;
  const double a = (1.0 + ratio) / ratio;
  return p * p / l * (a * a + 1.0 / (k * ratio * ratio));
}

void check_index(const SceneModel& scene, int i) {
  if (i < 0 || i >= scene.rank) throw InvalidArgument("noise index out of range");
}

}  // namespace

double var_phi_r(double phi_r, double l, int n, int t) {
  const double k = dof(n, t);
  check_count(l);
  return phi_r * phi_r / (l * k);
}

double var_psi_i(double psi_i, double xi, double l, int n, int t) {
  return ratio_variance(psi_i, xi, l, n, t);
}

double var_phi_s(double phi_s, double eps, double l, int n, int t) {
  return ratio_variance(phi_s, eps, l, n, t);
}

double xi_i(double psi_i, double phi_r, const SceneModel& scene, int i) {
  check_index(scene, i);
  return psi_i / (phi_r * scene.wu_gamma_wu(i, i).real());
}

double xi_i_projection(double psi_i, double phi_r, const SceneModel& scene, int i) {
  check_index(scene, i);
  const auto n = scene.n_mics;
  const CMatrix pg = projection_pg_perp(scene.g, scene.gamma);
  CMatrix vbar(n, scene.rank - 1);
  for (int j = 0, c = 0; j < scene.rank; ++j) {
    if (j != i) vbar.col(c++) = scene.v.col(j);
  }
  CMatrix p_vbar = CMatrix::Identity(n, n);
  if (vbar.cols() > 0) {
    const CMatrix x = pg * scene.gamma.solve(vbar);  // P_g G^{-1} Vbar
    const CMatrix gram = vbar.adjoint() * x;
    p_vbar -= x * gram.partialPivLu().solve(vbar.adjoint());
  }
  const CVector vi = scene.v.col(i);
  const CVector rhs = p_vbar * pg * scene.gamma.solve(vi);
  const cdouble q = vi.dot(rhs);
  return psi_i / phi_r * q.real();
}

double epsilon(double phi_s, double phi_r, const SceneModel& scene) {
  return phi_s / (phi_r * scene.ws_gamma_ws);
}

double epsilon_projection(double phi_s, double phi_r, const SceneModel& scene) {
  const CMatrix pv = projection_pv_perp(scene.v, scene.gamma);
  const CVector rhs = pv * scene.gamma.solve(scene.g.entries);
  const cdouble q = scene.g.entries.dot(rhs);
  return phi_s / phi_r * q.real();
}

VarianceReport variance_report(const SceneModel& scene, const PsdEstimates& truth, double l) {
  if (truth.psi_v.rows() != scene.rank) throw InvalidArgument("truth Psi_v has wrong size");
  VarianceReport r;
  const int n = scene.n_mics;
  const int t = scene.rank;
  r.var_phi_r = var_phi_r(truth.phi_r, l, n, t);
  r.epsilon = epsilon(truth.phi_s, truth.phi_r, scene);
  r.var_phi_s = var_phi_s(truth.phi_s, r.epsilon, l, n, t);
  for (int i = 0; i < t; ++i) {
    const double psi = truth.psi_v(i, i).real();
    r.xi.push_back(xi_i(psi, truth.phi_r, scene, i));
    r.var_psi_diag.push_back(var_psi_i(psi, r.xi.back(), l, n, t));
  }
  return r;
}

CrbReport crb_closed_form(const SceneModel& scene, const PsdEstimates& truth, double l) {
  const VarianceReport v = variance_report(scene, truth, l);
  CrbReport c;
  c.crb_phi_r = var_phi_r(truth.phi_r, l, scene.n_mics, scene.rank);
  c.crb_phi_s = v.var_phi_s;
  c.crb_psi_diag = v.var_psi_diag;
  return c;
}

RVector fim_parameters(const PsdEstimates& truth) {
  const int t = static_cast<int>(truth.psi_v.rows());
  const int m = t + 1;
  RVector p = RVector::Zero(1 + m * m);
  CMatrix phi_sv = CMatrix::Zero(m, m);
  phi_sv(0, 0) = truth.phi_s;
  if (t > 0) phi_sv.bottomRightCorner(t, t) = truth.psi_v;
  p(0) = truth.phi_r;
  int k = 1;
  for (int d = 0; d < m; ++d) p(k++) = phi_sv(d, d).real();
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      p(k++) = phi_sv(i, j).real();
      p(k++) = phi_sv(i, j).imag();
    }
  }
  return p;
}

namespace {

CMatrix basis_of(const SceneModel& scene) {
  CMatrix a(scene.n_mics, scene.rank + 1);
  a.col(0) = scene.g.entries;
  if (scene.rank > 0) a.rightCols(scene.rank) = scene.v;
  return a;
}

}  // namespace

CMatrix model_covariance(const SceneModel& scene, const RVector& params) {
  const int m = scene.rank + 1;
  if (params.size() != 1 + m * m) throw InvalidArgument("model_covariance: wrong parameter count");
  CMatrix phi_sv(m, m);
  int k = 1;
  for (int d = 0; d < m; ++d) phi_sv(d, d) = params(k++);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      phi_sv(i, j) = cdouble(params(k), params(k + 1));
      phi_sv(j, i) = std::conj(phi_sv(i, j));
      k += 2;
    }
  }
  const CMatrix a = basis_of(scene);
  return hermitian_part(a * phi_sv * a.adjoint() + params(0) * scene.gamma.matrix());
}

std::vector<CMatrix> model_derivatives(const SceneModel& scene, int n_params) {
  const int m = scene.rank + 1;
  if (n_params != 1 + m * m) throw InvalidArgument("model_derivatives: wrong parameter count");
  const CMatrix a = basis_of(scene);
  std::vector<CMatrix> d;
  d.reserve(static_cast<std::size_t>(n_params));
  d.push_back(scene.gamma.matrix());
  for (int k = 0; k < m; ++k) d.push_back(a.col(k) * a.col(k).adjoint());
  const cdouble j1(0.0, 1.0);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const CMatrix ij = a.col(i) * a.col(j).adjoint();
      d.push_back(ij + ij.adjoint());
      d.push_back(j1 * ij - j1 * ij.adjoint());
    }
  }
  return d;
}

double derivative_check(const SceneModel& scene, const PsdEstimates& truth) {
  const RVector p = fim_parameters(truth);
  const auto d = model_derivatives(scene, static_cast<int>(p.size()));
  const double scale = std::max(p.head(scene.rank + 2).cwiseAbs().maxCoeff(), 1e-300);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double h = 1e-6 * std::max(std::abs(p(k)), scale);
    RVector lo = p;
    RVector hi = p;
    lo(k) -= h;
    hi(k) += h;
    const CMatrix fd = (model_covariance(scene, hi) - model_covariance(scene, lo)) / (2.0 * h);
    const double ref = std::max(d[static_cast<std::size_t>(k)].norm(), 1e-300);
    worst = std::max(worst, (fd - d[static_cast<std::size_t>(k)]).norm() / ref);
  }
  return worst;
}

CrbReport fim_numeric(const SceneModel& scene, const PsdEstimates& truth, double l) {
  check_count(l);
  const RVector p = fim_parameters(truth);
  const int np = static_cast<int>(p.size());
  const CMatrix phi = model_covariance(scene, p);
  Eigen::LLT<CMatrix> llt(phi);
  if (llt.info() != Eigen::Success) throw NumericError("fim_numeric: model covariance is not positive definite");
  const auto d = model_derivatives(scene, np);
  std::vector<CMatrix> pd;  // Phi^-1 D_k
  pd.reserve(d.size());
  for (const auto& dk : d) pd.push_back(llt.solve(dk));

  RMatrix fim(np, np);
  for (int i = 0; i < np; ++i) {
    for (int j = i; j < np; ++j) {
      // Re Tr[X Y] = sum_ab Re(X_ab Y_ba)
      const auto& x = pd[static_cast<std::size_t>(i)];
      const auto& y = pd[static_cast<std::size_t>(j)];
      fim(i, j) = fim(j, i) = l * (x.cwiseProduct(y.transpose())).sum().real();
    }
  }

  Eigen::SelfAdjointEigenSolver<RMatrix> evd(fim);
  const RVector& ev = evd.eigenvalues();
  const double tol = 1e-13 * ev.cwiseAbs().maxCoeff() * np;
  const auto rank = (ev.array() > tol).count();
  if (rank < np) {
    throw NumericError("fim_numeric: Fisher information is singular (rank " + std::to_string(rank) +
                       " of " + std::to_string(np) + ")");
  }
  const RMatrix inv = evd.eigenvectors() * ev.cwiseInverse().asDiagonal() * evd.eigenvectors().transpose();

  CrbReport c;
  c.fim = fim;
  c.crb_phi_r = inv(0, 0);
  c.crb_phi_s = inv(1, 1);
  for (int i = 0; i < scene.rank; ++i) c.crb_psi_diag.push_back(inv(2 + i, 2 + i));
  return c;
}

double log_likelihood(const CMatrix& r, const CMatrix& phi, double l) {
  const auto n = phi.rows();
  if (phi.cols() != n || r.rows() != n || r.cols() != n) throw InvalidArgument("log_likelihood: shape mismatch");
  Eigen::LLT<CMatrix> llt(hermitian_part(phi));
  if (llt.info() != Eigen::Success) throw InvalidArgument("log_likelihood: model covariance is not positive definite");
  const auto& lower = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(lower(i, i).real());
  const double tr = llt.solve(r).trace().real();
  return l * (-static_cast<double>(n) * std::log(std::numbers::pi) - logdet - tr);
}

double golden_section_max(const std::function<double(double)>& f, double lo, double hi, double rel_tol) {
  if (!(lo < hi)) throw InvalidArgument("golden_section_max: empty bracket");
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 500 && (b - a) > rel_tol * std::abs(0.5 * (a + b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace psdml
