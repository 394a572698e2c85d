#pragma once

#include <cmath>
#include <vector>

#include "cltlab/chain.hpp"
#include "cltlab/poisson.hpp"

namespace cltlab {

// Transfer operator for the sigma-normalized martingale increment
// U_hat(x,y) = (xi_check(y) - Q xi_check(x)) / sigma:
// M(theta)(x,y) = Q(x,y) exp(i theta U_hat(x,y)).
struct PairKernel {
  double theta = 0.0;
  CMatrix matrix;
};

inline PairKernel pair_kernel(const FiniteChain& chain,
                              const PoissonSolution& sol, double theta) {
  if (sol.sigma2 <= 0.0)
    throw DegenerateVariance("sigma2 = 0 in pair kernel");
  const double sigma = std::sqrt(sol.sigma2);
  const Eigen::Index n = chain.states();
  CMatrix m(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      m(x, y) = chain.kernel(x, y) *
                std::exp(Complex(0.0, theta * (sol.xi_check[y] -
                                               sol.q_xi_check[x]) /
                                          sigma));
  return {theta, std::move(m)};
}

// E_nu[e^{i theta T_hat_n}] = nu^T M(theta)^n 1.
inline Complex pair_charfn(const FiniteChain& chain, const PairKernel& pk,
                           long n) {
  const CMatrix power = matrix_power(pk.matrix, n);
  return (chain.stationary.cast<Complex>().transpose() * power *
          CVector::Ones(chain.states()))(0);
}

struct MartingaleIdentity {
  double t_n = 0.0;
  double v_n = 0.0;
  double max_violation = 0.0;  // |S_n - T_n - V_n|
};

// Along a realized path: U_k = xi_check(X_k) - Q xi_check(X_{k-1}),
// T_n = sum U_k, V_n = Q xi_check(X_0) - Q xi_check(X_n), S_n = T_n + V_n.
inline MartingaleIdentity martingale_identity(
    const FiniteChain& chain, const PoissonSolution& sol,
    const std::vector<int>& path_states) {
  MartingaleIdentity out;
  if (path_states.empty()) return out;
  for (int s : path_states)
    if (s < 0 || s >= chain.states())
      throw IndexOutOfRange("path state " + std::to_string(s));
  double s_n = 0.0, t_n = 0.0;
  for (size_t k = 1; k < path_states.size(); ++k) {
    s_n += chain.observable[path_states[k]];
    t_n += sol.xi_check[path_states[k]] - sol.q_xi_check[path_states[k - 1]];
  }
  out.t_n = t_n;
  out.v_n = sol.q_xi_check[path_states.front()] -
            sol.q_xi_check[path_states.back()];
  out.max_violation = std::abs(s_n - out.t_n - out.v_n);
  return out;
}

// E[W_k | X_{l-1} = x] = (Q^{k-l} psi_hat)(x), with W_k = U_hat_k^2 - 1.
// The one-step conditional second moment is computed independently and
// compared to psi_hat, then both are propagated by matrix powers.
inline double lemma41_check(const FiniteChain& chain,
                            const PoissonSolution& sol, long max_lag) {
  if (sol.sigma2 <= 0.0) throw DegenerateVariance("sigma2 = 0");
  const Eigen::Index n = chain.states();
  Vector w(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    double acc = 0.0;
    for (Eigen::Index y = 0; y < n; ++y) {
      const double u = (sol.xi_check[y] - sol.q_xi_check[x]);
      acc += chain.kernel(x, y) * u * u / sol.sigma2;
    }
    w[x] = acc - 1.0;
  }
  const Vector psi_hat = sol.psi / sol.sigma2;
  Vector lhs = w, rhs = psi_hat;
  double worst = (lhs - rhs).lpNorm<Eigen::Infinity>();
  for (long lag = 1; lag <= max_lag; ++lag) {
    lhs = chain.kernel * lhs;
    rhs = chain.kernel * rhs;
    worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

// Z' = sum_p Q^p psi_hat, via the same rank-one-shifted solve as the
// Poisson equation.
inline Vector z_prime(const FiniteChain& chain, const PoissonSolution& sol) {
  if (sol.sigma2 <= 0.0) return Vector::Zero(chain.states());
  const Eigen::Index n = chain.states();
  Matrix m = Matrix::Identity(n, n) - chain.kernel +
             Vector::Ones(n) * chain.stationary.transpose();
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) throw SingularSystem("Z' system singular");
  return lu.solve((sol.psi / sol.sigma2).eval());
}

struct CharfnDecomposition {
  double t = 0.0;
  long n = 0;
  Complex total;  // E[e^{i(t/sqrt n) T_hat_n}] - e^{-t^2/2}
  Complex A;
  Complex B;
  Complex C;
};

// E[e^{i(t/sqrt n) T_hat_n}] - e^{-t^2/2} = A_n + B_n + C_n with
// A_n = (1 - t^2/2n)^n - e^{-t^2/2},
// B_n = sum_k (1 - t^2/2n)^k E[e^{i theta T_{n-k-1}} u(i theta U_{n-k})],
// C_n = -(t^2/2n) sum_k (1 - t^2/2n)^k E[e^{i theta T_{n-k-1}} W_{n-k}],
// where u(ix) = e^{ix} - 1 - ix + x^2/2 and theta = t/sqrt(n). The pair
// expectations reduce to left-vector propagation through M(theta).
inline CharfnDecomposition abc_decomposition(const FiniteChain& chain,
                                             const PoissonSolution& sol,
                                             double t, long n) {
  if (sol.sigma2 <= 0.0) throw DegenerateVariance("sigma2 = 0");
  const double theta = t / std::sqrt(static_cast<double>(n));
  const PairKernel pk = pair_kernel(chain, sol, theta);
  const Eigen::Index d = chain.states();
  const double sigma = std::sqrt(sol.sigma2);
  const Vector psi_hat = sol.psi / sol.sigma2;

  // per-state aggregation of the remainder weight u(i theta U_hat)
  CVector u_agg = CVector::Zero(d);
  for (Eigen::Index x = 0; x < d; ++x)
    for (Eigen::Index y = 0; y < d; ++y) {
      const double arg =
          theta * (sol.xi_check[y] - sol.q_xi_check[x]) / sigma;
      const Complex u = std::exp(Complex(0.0, arg)) -
                        Complex(1.0, arg) + 0.5 * arg * arg;
      u_agg[x] += chain.kernel(x, y) * u;
    }

  const double q = 1.0 - t * t / (2.0 * static_cast<double>(n));
  CharfnDecomposition out;
  out.t = t;
  out.n = n;
  out.A = std::pow(q, static_cast<double>(n)) - std::exp(-t * t / 2.0);

  // mu_m = nu^T M(theta)^m, built incrementally for m = 0..n-1;
  // index k in the displayed sums corresponds to m = n-k-1.
  Eigen::RowVectorXcd mu = chain.stationary.cast<Complex>().transpose();
  Complex b = 0.0, c = 0.0;
  for (long m = 0; m <= n - 1; ++m) {
    const double qk = std::pow(q, static_cast<double>(n - m - 1));
    b += qk * (mu * u_agg)(0);
    c += qk * (mu * psi_hat.cast<Complex>())(0);
    if (m < n - 1) mu = mu * pk.matrix;
  }
  out.B = b;
  out.C = -(t * t / (2.0 * static_cast<double>(n))) * c;
  out.total = pair_charfn(chain, pk, n) - std::exp(-t * t / 2.0);
  return out;
}

struct RatioPoint {
  long n = 0;
  double ratio = 0.0;     // R(n)
  double arg_t = 0.0;     // maximizing t
};

// R(n) = max over a log-spaced grid of 0 < |t| <= sqrt(n) of
// |E[e^{i t T_hat_n / sqrt n}] - e^{-t^2/2}| sqrt(n) / |t|.
inline std::vector<RatioPoint> prop41_ratio(const FiniteChain& chain,
                                            const PoissonSolution& sol,
                                            const std::vector<long>& n_grid,
                                            int t_per_n) {
  if (sol.sigma2 <= 0.0) throw DegenerateVariance("sigma2 = 0");
  std::vector<RatioPoint> out;
  for (long n : n_grid) {
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    RatioPoint pt;
    pt.n = n;
    for (int j = 0; j < t_per_n; ++j) {
      // log-spaced from sqrt(n)/1000 up to sqrt(n)
      const double t =
          sqrt_n * std::pow(10.0, -3.0 + 3.0 * (j + 1.0) / t_per_n);
      const PairKernel pk = pair_kernel(chain, sol, t / sqrt_n);
      const Complex charfn = pair_charfn(chain, pk, n);
      const double val =
          std::abs(charfn - std::exp(-t * t / 2.0)) * sqrt_n / t;
      if (val > pt.ratio) {
        pt.ratio = val;
        pt.arg_t = t;
      }
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace cltlab
