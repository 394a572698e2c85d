#pragma once

#include <cmath>
#include <vector>

#include "cltlab/chain.hpp"

namespace cltlab {

struct PoissonSolution {
  Vector xi_check;    // solves (I - Q) xi_check = xi, nu(xi_check) = 0
  Vector q_xi_check;  // Q xi_check
  double sigma2 = 0.0;
  bool degenerate = false;  // sigma2 clamped at zero
  Vector psi;               // Q(xi_check^2) - (Q xi_check)^2 - sigma2 * 1
};

// Direct linear solve of the Poisson equation; the Neumann series
// sum_n Q^n xi stays in the tests as an independent oracle.
inline PoissonSolution solve_poisson(const FiniteChain& chain) {
  const Eigen::Index n = chain.states();
  // (I - Q + 1 nu^T) is nonsingular when Q has a spectral gap and the
  // rank-one shift enforces nu(xi_check) = 0 for free.
  Matrix m = Matrix::Identity(n, n) - chain.kernel +
             Vector::Ones(n) * chain.stationary.transpose();
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible())
    throw SingularSystem("Poisson system singular despite spectral gap");
  PoissonSolution sol;
  sol.xi_check = lu.solve(chain.observable);
  sol.q_xi_check = chain.kernel * sol.xi_check;

  const Vector xi2 = sol.xi_check.array().square();
  const Vector qxi2 = sol.q_xi_check.array().square();
  sol.sigma2 = chain.nu(xi2) - chain.nu(qxi2);
  if (sol.sigma2 < 0.0) {
    if (sol.sigma2 < -1e-12)
      throw SingularSystem("sigma2 negative beyond roundoff");
    sol.sigma2 = 0.0;
  }
  if (sol.sigma2 <= 0.0) sol.degenerate = true;
  sol.psi = chain.kernel * xi2 - qxi2 -
            Vector::Constant(n, sol.sigma2);
  return sol;
}

struct H2Series {
  std::vector<double> terms;         // a_p = nu(|Q^p psi|^{3/2})^{2/3}
  std::vector<double> partial_sums;
  double total = 0.0;                // C_3
  double decay_ratio = 0.0;          // fitted geometric ratio
};

inline H2Series h2_series(const FiniteChain& chain,
                          const PoissonSolution& sol, long p_max) {
  H2Series out;
  Vector g = sol.psi;
  double sum = 0.0;
  for (long p = 0; p <= p_max; ++p) {
    const double a =
        std::pow(chain.nu(g.array().abs().pow(1.5).matrix()), 2.0 / 3.0);
    out.terms.push_back(a);
    sum += a;
    out.partial_sums.push_back(sum);
    g = chain.kernel * g;
  }
  out.total = sum;
  // geometric ratio from a log-linear fit over the usable tail
  std::vector<double> xs, ys;
  for (size_t p = 0; p < out.terms.size(); ++p)
    if (out.terms[p] > 1e-14) {
      xs.push_back(static_cast<double>(p));
      ys.push_back(std::log(out.terms[p]));
    }
  if (xs.size() >= 2) {
    Matrix x(xs.size(), 2);
    Vector y(ys.size());
    for (size_t i = 0; i < xs.size(); ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = xs[i];
      y[i] = ys[i];
    }
    out.decay_ratio = std::exp(ols(x, y).first[1]);
  }
  return out;
}

// Stationary autocovariance gamma(h) = nu(xi . Q^h xi).
inline double autocovariance(const FiniteChain& chain, long h) {
  Vector g = chain.observable;
  for (long k = 0; k < h; ++k) g = chain.kernel * g;
  return chain.nu(chain.observable.cwiseProduct(g));
}

struct VarianceConsistency {
  double exact_var_over_n = 0.0;
  double ratio = 0.0;  // to sigma2
  bool degenerate = false;
};

// Var_nu(S_n)/n = gamma(0) + 2 sum_{h=1}^{n-1} (1 - h/n) gamma(h),
// compared against the Poisson-equation sigma2.
inline VarianceConsistency variance_consistency(const FiniteChain& chain,
                                                const PoissonSolution& sol,
                                                long n) {
  VarianceConsistency out;
  Vector g = chain.observable;
  double acc = chain.nu(chain.observable.cwiseProduct(g));  // gamma(0)
  for (long h = 1; h < n; ++h) {
    g = chain.kernel * g;
    const double gamma_h = chain.nu(chain.observable.cwiseProduct(g));
    acc += 2.0 * (1.0 - static_cast<double>(h) / static_cast<double>(n)) *
           gamma_h;
  }
  out.exact_var_over_n = acc;
  if (sol.sigma2 <= 0.0) {
    out.degenerate = true;
    return out;
  }
  out.ratio = acc / sol.sigma2;
  return out;
}

}  // namespace cltlab
