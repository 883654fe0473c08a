#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace psdml {

using cdouble = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Bad input values or shapes.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation could not proceed for numerical reasons.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The speaker direction is (numerically) inside the noise subspace, or a
/// blocked noise basis lost rank.
class DegenerateGeometry : public NumericError {
 public:
  using NumericError::NumericError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-fatal conditions collected alongside a result.
using Warnings = std::vector<std::string>;

/// (X + X^H) / 2
inline CMatrix hermitian_part(const CMatrix& x) { return 0.5 * (x + x.adjoint()); }

}  // namespace psdml
