#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>

#include "relayopt/errors.hpp"

namespace relayopt {

using cplx    = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Relative singular-value threshold below which a direction counts as rank deficient.
inline constexpr double kRankTolerance = 1e-10;

/// Tolerance used to accept a matrix as Hermitian.
inline constexpr double kHermitianTolerance = 1e-10;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived> &m)
{
  for (Eigen::Index j = 0; j < m.cols(); ++j)
  {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
      auto const v = m(i, j);
      if (!std::isfinite(std::real(v)) || !std::isfinite(std::imag(v)))
      {
        return false;
      }
    }
  }
  return true;
}

/**
 * Orthonormal basis of the orthogonal complement of range(M).
 *
 * For an m x c matrix M returns B (m x (m - rank M)) with B^H B = I and M^H B = 0.
 * The basis is the trailing block of left singular vectors; rank is decided by
 * singular values above kRankTolerance times the largest one.
 */
inline CMatrix null_space_basis(const CMatrix &m)
{
  if (m.rows() == 0)
  {
    throw DimensionError("null_space_basis: matrix has no rows");
  }
  if (!all_finite(m))
  {
    throw DimensionError("null_space_basis: non-finite entry");
  }
  if (m.cols() == 0)
  {
    return CMatrix::Identity(m.rows(), m.rows());
  }

  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU);
  RVector const &sv   = svd.singularValues();
  double const   smax = sv.size() > 0 ? sv(0) : 0.0;

  Eigen::Index rank = 0;
  if (smax > 0.0)
  {
    for (Eigen::Index k = 0; k < sv.size(); ++k)
    {
      if (sv(k) > kRankTolerance * smax)
      {
        ++rank;
      }
    }
  }

  Eigen::Index const nullity = m.rows() - rank;
  if (nullity == 0)
  {
    throw NoZeroForcingDirection();
  }
  return svd.matrixU().rightCols(nullity);
}

/// Stacks [Re(x); Im(x)]; an isometry from C^n onto R^{2n}.
inline RVector complex_to_real(const CVector &x)
{
  RVector out(2 * x.size());
  out.head(x.size()) = x.real();
  out.tail(x.size()) = x.imag();
  return out;
}

inline CVector real_to_complex(const RVector &x)
{
  if (x.size() % 2 != 0)
  {
    throw DimensionError("real_to_complex: odd length");
  }
  Eigen::Index const n = x.size() / 2;
  CVector            out(n);
  for (Eigen::Index k = 0; k < n; ++k)
  {
    out(k) = cplx(x(k), x(n + k));
  }
  return out;
}

inline bool is_hermitian(const CMatrix &a, double tol = kHermitianTolerance)
{
  if (a.rows() != a.cols())
  {
    return false;
  }
  double const scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// f^H A f for Hermitian A.
inline double hermitian_quadratic(const CVector &f, const CMatrix &a)
{
  if (a.rows() != f.size() || a.cols() != f.size())
  {
    throw DimensionError("hermitian_quadratic: dimension mismatch");
  }
  if (!is_hermitian(a))
  {
    throw MatrixPropertyError("hermitian_quadratic: matrix is not Hermitian");
  }
  cplx const v = f.dot(a * f);  // dot() conjugates its left operand
  return v.real();
}

/**
 * det(I_2 + H H^H C^{-1}) for a 2x2 channel H and a 2x2 Hermitian positive
 * definite noise covariance C.
 */
inline double det_2x2_hermitian_form(const CMatrix &h, const CMatrix &c)
{
  if (h.rows() != 2 || h.cols() != 2 || c.rows() != 2 || c.cols() != 2)
  {
    throw DimensionError("det_2x2_hermitian_form: expects 2x2 operands");
  }
  if (!is_hermitian(c))
  {
    throw MatrixPropertyError("det_2x2_hermitian_form: covariance is not Hermitian");
  }
  double const c00 = c(0, 0).real();
  cplx const   det_c = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  if (!(c00 > 0.0) || !(det_c.real() > 0.0))
  {
    throw MatrixPropertyError("det_2x2_hermitian_form: covariance is singular or indefinite");
  }

  Eigen::Matrix2cd c_inv;
  c_inv << c(1, 1), -c(0, 1), -c(1, 0), c(0, 0);
  c_inv /= det_c;

  Eigen::Matrix2cd const hh = h * h.adjoint();
  Eigen::Matrix2cd const m  = Eigen::Matrix2cd::Identity() + hh * c_inv;
  return (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real();
}

}  // namespace relayopt
