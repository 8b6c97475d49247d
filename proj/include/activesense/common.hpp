#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace activesense {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Raised when the information matrix is too ill-conditioned to invert.
class NonIdentifiable : public Error {
public:
    NonIdentifiable(const std::string& what, double smallest_eigenvalue)
        : Error(what), smallest_eigenvalue_(smallest_eigenvalue) {}
    double smallest_eigenvalue() const { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

// Hermitian part of a square matrix.
inline CMatrix hermitian_part(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }
inline RMatrix symmetric_part(const RMatrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace activesense
