#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <vector>

#include "cltlab/chain.hpp"
#include "cltlab/poisson.hpp"

namespace cltlab {

// Q(t)(x,y) = Q(x,y) exp(i t xi(y)).
struct FourierKernel {
  double t = 0.0;
  CMatrix matrix;
};

inline FourierKernel fourier_kernel(const FiniteChain& chain, double t) {
  const Eigen::Index n = chain.states();
  CMatrix m = chain.kernel.cast<Complex>();
  for (Eigen::Index y = 0; y < n; ++y)
    m.col(y) *= std::exp(Complex(0.0, t * chain.observable[y]));
  return {t, std::move(m)};
}

// Perturbed decomposition Q(t)^n f = lambda^n <phi,f> v + N^n f.
struct SpectralTriple {
  double t = 0.0;
  Complex lambda;
  CVector v;    // right eigenvector, <nu,v> = 1
  CVector phi;  // left functional, <phi,v> = 1
  CMatrix remainder;
  double gap = 0.0;  // |lambda| - modulus of the next eigenvalue
};

inline SpectralTriple dominant_triple(const FourierKernel& kernel,
                                      const FiniteChain& chain,
                                      double gap_min = 1e-6) {
  const Eigen::Index n = chain.states();
  Eigen::ComplexEigenSolver<CMatrix> es(kernel.matrix);
  Eigen::Index top = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (std::abs(es.eigenvalues()[i]) > std::abs(es.eigenvalues()[top]))
      top = i;
  double second = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != top) second = std::max(second, std::abs(es.eigenvalues()[i]));
  const Complex lambda = es.eigenvalues()[top];
  if (std::abs(lambda) - second < gap_min)
    throw AmbiguousDominant("dominant eigenvalue gap " +
                            std::to_string(std::abs(lambda) - second) +
                            " below gap_min at t=" + std::to_string(kernel.t));

  // left eigenvectors are the rows of V^{-1}
  CMatrix vinv = es.eigenvectors().inverse();
  CVector v = es.eigenvectors().col(top);
  CVector phi = vinv.row(top).transpose();

  // normalize <nu,v> = 1 then <phi,v> = 1; fixes the phase so that
  // t -> (lambda, v, phi) is continuous near t = 0
  // bilinear pairing; nu is real so Eigen's conjugating dot is safe
  const Complex nu_v = chain.stationary.cast<Complex>().dot(v);
  if (std::abs(nu_v) < 1e-10)
    throw NormalizationFailure("<nu, v> nearly zero at t=" +
                               std::to_string(kernel.t));
  v /= nu_v;
  const Complex phi_v = (phi.transpose() * v)(0);
  if (std::abs(phi_v) < 1e-12)
    throw NormalizationFailure("<phi, v> nearly zero");
  phi /= phi_v;

  SpectralTriple triple;
  triple.t = kernel.t;
  triple.lambda = lambda;
  triple.v = v;
  triple.phi = phi;
  triple.remainder = kernel.matrix - lambda * (v * phi.transpose());
  triple.gap = std::abs(lambda) - second;
  return triple;
}

// max over n <= n_max and random f of
// ||Q(t)^n f - lambda^n <phi,f> v - N^n f||_inf / ||f||_inf
inline double decomposition_residual(const FiniteChain& chain, double t,
                                     long n_max, int n_trials = 20,
                                     uint64_t seed = 42) {
  const auto kernel = fourier_kernel(chain, t);
  const auto triple = dominant_triple(kernel, chain);
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < n_trials; ++trial) {
    const CVector f = random_cvector(rng, chain.states());
    const double nf = f.lpNorm<Eigen::Infinity>();
    const Complex phi_f = (triple.phi.transpose() * f)(0);
    CVector qf = f, nfv = f;
    Complex lam_n = 1.0;
    for (long n = 1; n <= n_max; ++n) {
      qf = kernel.matrix * qf;
      nfv = triple.remainder * nfv;
      lam_n *= triple.lambda;
      const CVector diff = qf - lam_n * phi_f * triple.v - nfv;
      worst = std::max(worst, diff.lpNorm<Eigen::Infinity>() / nf);
    }
  }
  return worst;
}

// Pi(t) = (1/2 pi i) \oint (z - Q(t))^{-1} dz over the circle
// (center, radius), trapezoid rule with m nodes.
inline CMatrix contour_projector(const FiniteChain& chain, double t,
                                 Complex center, double radius, long m) {
  const auto kernel = fourier_kernel(chain, t);
  const Eigen::Index n = chain.states();
  const CMatrix id = CMatrix::Identity(n, n);
  CMatrix acc = CMatrix::Zero(n, n);
  const double knorm = kernel.matrix.cwiseAbs().sum();
  for (long j = 0; j < m; ++j) {
    const double theta =
        2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
    const Complex w = radius * std::exp(Complex(0.0, theta));
    const Complex z = center + w;
    Eigen::PartialPivLU<CMatrix> lu(z * id - kernel.matrix);
    const CMatrix res = lu.inverse();
    if (res.cwiseAbs().sum() * (std::abs(z) * n + knorm) > 1e12)
      throw EigenvalueOnContour("resolvent condition above 1e12 at node " +
                                std::to_string(j));
    // dz = i w dtheta; the i cancels against 1/(2 pi i)
    acc += w * res;
  }
  CMatrix pi = acc / static_cast<double>(m);
  const Complex tr = pi.trace();
  if (std::abs(tr - Complex(1.0, 0.0)) > 1e-2)
    throw EnclosureViolation("trace(Pi) = " + std::to_string(tr.real()) +
                             " + " + std::to_string(tr.imag()) +
                             "i, expected 1");
  return pi;
}

// sup over random W-unit f of nu(|(z - Q(t))^{-1} f - (z - Q)^{-1} f|).
inline double resolvent_perturbation(const FiniteChain& chain, Complex z,
                                     double t, int trials,
                                     uint64_t seed = 42) {
  const Eigen::Index n = chain.states();
  const CMatrix id = CMatrix::Identity(n, n);
  const CMatrix a0 = z * id - chain.kernel.cast<Complex>();
  const CMatrix at = z * id - fourier_kernel(chain, t).matrix;
  Eigen::FullPivLU<CMatrix> lu0(a0), lut(at);
  if (!lu0.isInvertible() || !lut.isInvertible())
    throw SingularResolvent("z lies in the spectrum");
  std::mt19937_64 rng(seed);
  double sup = 0.0;
  for (int k = 0; k < trials; ++k) {
    CVector f = random_cvector(rng, n);
    double nf = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      nf = std::max(nf, std::abs(f[i]) / chain.weight[i]);
    f /= nf;
    const CVector diff = lut.solve(f) - lu0.solve(f);
    double val = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      val += chain.stationary[i] * std::abs(diff[i]);
    sup = std::max(sup, val);
  }
  return sup;
}

struct LambdaExpansion {
  double second_deriv = 0.0;      // -2 c2, should match sigma2
  Complex third_order_coeff;      // c3
  double max_residual = 0.0;      // fit residual over the grid
};

// Least-squares fit lambda(u) = 1 + c2 u^2 + c3 u^3 + c4 u^4 on Re and Im
// jointly over a symmetric u-grid.
inline LambdaExpansion lambda_expansion(const FiniteChain& chain,
                                        const PoissonSolution& sol,
                                        const std::vector<double>& u_grid) {
  if (sol.sigma2 <= 0.0)
    throw DegenerateVariance("sigma2 = 0, no quadratic term to fit");
  const size_t m = u_grid.size();
  Matrix x(m, 3);
  CVector y(m);
  for (size_t i = 0; i < m; ++i) {
    const double u = u_grid[i];
    x(i, 0) = u * u;
    x(i, 1) = u * u * u;
    x(i, 2) = u * u * u * u;
    const auto triple = dominant_triple(fourier_kernel(chain, u), chain);
    y[i] = triple.lambda - Complex(1.0, 0.0);
  }
  const Matrix xtx = x.transpose() * x;
  Eigen::LDLT<Matrix> solver(xtx);
  const Vector cr = solver.solve(x.transpose() * y.real());
  const Vector ci = solver.solve(x.transpose() * y.imag());
  LambdaExpansion out;
  out.second_deriv = -2.0 * cr[0];
  out.third_order_coeff = Complex(cr[1], ci[1]);
  for (size_t i = 0; i < m; ++i) {
    const Complex fit(x.row(i).dot(cr), x.row(i).dot(ci));
    out.max_residual = std::max(out.max_residual, std::abs(y[i] - fit));
  }
  return out;
}

// sup over t of nu(|e^{it xi} - 1| W) / |t|; on finite chains the sup of
// (H3) over the W-unit ball is attained at |f| = W.
inline double h3_check(const FiniteChain& chain,
                       const std::vector<double>& t_grid) {
  double sup = 0.0;
  for (double t : t_grid) {
    if (t == 0.0) continue;
    double val = 0.0;
    for (Eigen::Index x = 0; x < chain.states(); ++x)
      val += chain.stationary[x] *
             std::abs(std::exp(Complex(0.0, t * chain.observable[x])) - 1.0) *
             chain.weight[x];
    sup = std::max(sup, val / std::abs(t));
  }
  return sup;
}

struct H4Bound {
  double C = 0.0;
  double kappa = 0.0;
};

// Uniform Lasota-Yorke style bound ||Q(t)^n f||_W <= C kappa^n ||f||_W
// + C nu(|f|) over the t-grid and canonical basis vectors.
inline H4Bound h4_uniform_bound(const FiniteChain& chain,
                                const std::vector<double>& t_grid,
                                long n_max) {
  const Eigen::Index n = chain.states();
  double kappa = 0.0;
  for (double t : t_grid) {
    const auto kernel = fourier_kernel(chain, t);
    Eigen::ComplexEigenSolver<CMatrix> es(kernel.matrix);
    std::vector<double> mods;
    for (Eigen::Index i = 0; i < n; ++i)
      mods.push_back(std::abs(es.eigenvalues()[i]));
    std::sort(mods.begin(), mods.end(), std::greater<>());
    const double second = n > 1 ? mods[1] : 0.0;
    if (second >= 1.0 - 1e-9)
      throw ContractionFailure("second eigenvalue modulus " +
                               std::to_string(second) + " at t=" +
                               std::to_string(t));
    kappa = std::max(kappa, second);
  }
  kappa += 1e-6;

  double c = 0.0;
  for (double t : t_grid) {
    const auto kernel = fourier_kernel(chain, t);
    CMatrix power = CMatrix::Identity(n, n);
    double kpow = 1.0;
    for (long k = 1; k <= n_max; ++k) {
      power = power * kernel.matrix;
      kpow *= kappa;
      for (Eigen::Index j = 0; j < n; ++j) {
        double norm_qf = 0.0;
        for (Eigen::Index x = 0; x < n; ++x)
          norm_qf = std::max(norm_qf,
                             std::abs(power(x, j)) / chain.weight[x]);
        const double denom =
            kpow / chain.weight[j] + chain.stationary[j];
        c = std::max(c, norm_qf / denom);
      }
    }
  }
  return {c, kappa};
}

struct DoeblinCertificate {
  long ell = 0;
  double bound = 0.0;            // (3/4)^{1/ell}
  double worst_set_value = 0.0;  // fractional-knapsack upper bound
};

// Appendix certificate: find the smallest ell with the 1/2-contraction of
// Q^ell - 1 (x) nu in the W operator norm, then bound the mass that
// Q~^ell(x, .) can put on any set A with nu~(A) <= 1/(4 nu(W)), where
// Q~(x,y) = W(x)^{-1} W(y) Q(x,y) and nu~(A) = nu(W 1_A)/nu(W). The greedy
// fractional relaxation dominates every true set.
inline DoeblinCertificate doeblin_ess_bound(const FiniteChain& chain,
                                            long ell_max = 64) {
  const Eigen::Index n = chain.states();
  const Matrix proj = Vector::Ones(n) * chain.stationary.transpose();
  Matrix power = Matrix::Identity(n, n);
  long ell = 0;
  for (long k = 1; k <= ell_max; ++k) {
    power = power * chain.kernel;
    if (weighted_operator_norm(power - proj, chain.weight) <= 0.5) {
      ell = k;
      break;
    }
  }
  if (ell == 0)
    throw NoContractingPower("no power up to " + std::to_string(ell_max) +
                             " contracts to 1/2");

  const double nu_w = chain.nu(chain.weight);
  const double budget = 1.0 / (4.0 * nu_w);
  double worst = 0.0;
  for (Eigen::Index x = 0; x < n; ++x) {
    // item y: value Q~^ell(x,y), cost nu~({y})
    std::vector<std::pair<double, double>> items;  // (value, cost)
    for (Eigen::Index y = 0; y < n; ++y) {
      const double value =
          power(x, y) * chain.weight[y] / chain.weight[x];
      const double cost = chain.stationary[y] * chain.weight[y] / nu_w;
      items.emplace_back(value, cost);
    }
    std::sort(items.begin(), items.end(), [](auto a, auto b) {
      return a.first * b.second > b.first * a.second;  // value/cost desc
    });
    double remaining = budget, total = 0.0;
    for (const auto& [value, cost] : items) {
      if (remaining <= 0.0) break;
      const double take = cost <= remaining ? 1.0 : remaining / cost;
      total += take * value;
      remaining -= take * cost;
    }
    worst = std::max(worst, total);
  }
  return {ell, std::pow(0.75, 1.0 / static_cast<double>(ell)), worst};
}

struct SpectralScanRow {
  double t = 0.0;
  Complex lambda;
  double gap = 0.0;
  double residual_d = 0.0;
  double b1 = 0.0;  // nu(|v(t) - 1|)
  double b2 = 0.0;  // |<phi(t), 1> - 1|
  double b3 = 0.0;  // max_n nu(|N(t)^n 1|) / rho^n
};

inline std::vector<SpectralScanRow> spectral_scan(
    const FiniteChain& chain, const std::vector<double>& t_grid,
    long n_max = 30, double rho = 0.0) {
  if (rho <= 0.0) {
    const auto cert = ergodicity_constants(chain, 1);
    rho = std::min(cert.kappa0 + 0.1, 0.999);
  }
  std::vector<SpectralScanRow> rows;
  const Eigen::Index n = chain.states();
  const CVector ones = CVector::Ones(n);
  for (double t : t_grid) {
    const auto triple = dominant_triple(fourier_kernel(chain, t), chain);
    SpectralScanRow row;
    row.t = t;
    row.lambda = triple.lambda;
    row.gap = triple.gap;
    row.residual_d = decomposition_residual(chain, t, n_max);
    for (Eigen::Index x = 0; x < n; ++x)
      row.b1 += chain.stationary[x] * std::abs(triple.v[x] - 1.0);
    row.b2 = std::abs((triple.phi.transpose() * ones)(0) - Complex(1.0, 0.0));
    CVector g = ones;
    double rpow = 1.0;
    for (long k = 1; k <= n_max; ++k) {
      g = triple.remainder * g;
      rpow *= rho;
      double nu_abs = 0.0;
      for (Eigen::Index x = 0; x < n; ++x)
        nu_abs += chain.stationary[x] * std::abs(g[x]);
      row.b3 = std::max(row.b3, nu_abs / rpow);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cltlab
