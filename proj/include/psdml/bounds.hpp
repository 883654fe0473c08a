#pragma once

// Analytical variances of the closed-form estimators, their Cramér-Rao
// bounds, and a numeric Fisher-information oracle built from the linear
// structure of the model covariance.

#include <functional>
#include <vector>

#include "psdml/beamform.hpp"
#include "psdml/estimators.hpp"

namespace psdml {

struct VarianceReport {
  double var_phi_r = 0.0;
  double var_phi_s = 0.0;
  std::vector<double> var_psi_diag;
  std::vector<double> xi;
  double epsilon = 0.0;
};

struct CrbReport {
  double crb_phi_r = 0.0;
  double crb_phi_s = 0.0;
  std::vector<double> crb_psi_diag;
  RMatrix fim;  // filled by fim_numeric only
};

double var_phi_r(double phi_r, double l, int n, int t);
double var_psi_i(double psi_i, double xi_i, double l, int n, int t);
double var_phi_s(double phi_s, double epsilon, double l, int n, int t);

/// psi_i / (phi_R w_i^H G w_i), w_i the i-th noise LCMV column.
double xi_i(double psi_i, double phi_r, const SceneModel& scene, int i);

/// (psi_i / phi_R) v_i^H P_{Vbar_i} P_g G^{-1} v_i, with Vbar_i = V minus column i.
double xi_i_projection(double psi_i, double phi_r, const SceneModel& scene, int i);

/// phi_S / (phi_R w_s^H G w_s).
double epsilon(double phi_s, double phi_r, const SceneModel& scene);

/// (phi_S / phi_R) g^H P_v G^{-1} g.
double epsilon_projection(double phi_s, double phi_r, const SceneModel& scene);

/// Variances of the estimators at the true parameters; psi_i is the i-th
/// diagonal entry of truth.psi_v.
VarianceReport variance_report(const SceneModel& scene, const PsdEstimates& truth, double l);

CrbReport crb_closed_form(const SceneModel& scene, const PsdEstimates& truth, double l);

/// Real parameter vector for the numeric FIM:
///   [phi_R, diag(Phi_sv) (T+1 entries), Re/Im pairs of the strict upper
///   triangle of Phi_sv in row-major order],
/// where Phi_sv = blkdiag(phi_S, Psi_v) is the covariance of [s; v-coefs]
/// and the model is Phi_y = A Phi_sv A^H + phi_R G with A = [g | V].
RVector fim_parameters(const PsdEstimates& truth);

/// Phi_y at an arbitrary parameter vector in the layout above.
CMatrix model_covariance(const SceneModel& scene, const RVector& params);

/// Analytic dPhi_y / dparam_k.
std::vector<CMatrix> model_derivatives(const SceneModel& scene, int n_params);

/// Largest relative deviation between the analytic derivatives and central
/// finite differences with step 1e-6 * max(|param|, scale).
double derivative_check(const SceneModel& scene, const PsdEstimates& truth);

/// F_ij = L Re Tr[Phi^-1 D_i Phi^-1 D_j], inverted. Throws NumericError with
/// the numeric rank when the FIM is singular.
CrbReport fim_numeric(const SceneModel& scene, const PsdEstimates& truth, double l);

/// L (-N ln pi - ln|Phi| - Tr[Phi^-1 R]). Throws InvalidArgument if Phi is
/// not positive definite.
double log_likelihood(const CMatrix& r, const CMatrix& phi, double l);

/// Maximizer of a unimodal f on [lo, hi]; stops when the bracket is below
/// rel_tol times its midpoint.
double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double rel_tol = 1e-10);

}  // namespace psdml
