#pragma once

#include <Eigen/Dense>
#include <complex>
#include <random>
#include <vector>

#include "cltlab/errors.hpp"

namespace cltlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

// Weighted sup norm ||f||_W = max_x |f(x)| / W(x).
template <typename Derived>
double weighted_norm(const Eigen::MatrixBase<Derived>& f, const Vector& w) {
  if (f.size() != w.size())
    throw DimensionMismatch("vector and weight sizes differ");
  double m = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    m = std::max(m, std::abs(f[i]) / w[i]);
  return m;
}

// Induced operator norm on the W-weighted sup space:
// ||M||_W = max_x W(x)^{-1} sum_y |M(x,y)| W(y).
template <typename Derived>
double weighted_operator_norm(const Eigen::MatrixBase<Derived>& m,
                              const Vector& w) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < m.rows(); ++x) {
    double row = 0.0;
    for (Eigen::Index y = 0; y < m.cols(); ++y)
      row += std::abs(m(x, y)) * w[y];
    worst = std::max(worst, row / w[x]);
  }
  return worst;
}

inline CMatrix matrix_power(const CMatrix& m, long n) {
  CMatrix result = CMatrix::Identity(m.rows(), m.cols());
  CMatrix base = m;
  while (n > 0) {
    if (n & 1) result = result * base;
    base = base * base;
    n >>= 1;
  }
  return result;
}

// Left-vector propagation mu^T M^n, cheaper than a full matrix power when the
// iterates themselves are needed.
inline Eigen::RowVectorXcd propagate_left(const Eigen::RowVectorXcd& mu,
                                          const CMatrix& m, long n) {
  Eigen::RowVectorXcd v = mu;
  for (long k = 0; k < n; ++k) v = v * m;
  return v;
}

// Ordinary least squares y ~ X beta; returns (beta, stderr of beta).
inline std::pair<Vector, Vector> ols(const Matrix& x, const Vector& y) {
  Vector beta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  Vector resid = y - x * beta;
  const double dof = static_cast<double>(x.rows() - x.cols());
  double s2 = dof > 0 ? resid.squaredNorm() / dof : 0.0;
  Matrix cov = s2 * (x.transpose() * x).inverse();
  Vector se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return {beta, se};
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline CVector random_cvector(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = Complex(u(rng), u(rng));
  return v;
}

}  // namespace cltlab
