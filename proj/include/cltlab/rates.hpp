#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cltlab/chain.hpp"
#include "cltlab/poisson.hpp"
#include "cltlab/spectral.hpp"

namespace cltlab {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Exact law of S_n on the lattice offset + step * Z.
struct LatticeDistribution {
  double offset = 0.0;
  double step = 1.0;
  std::vector<double> probs;  // per integer site, starting at site 0
  long n = 0;
};

// E[e^{it S_n}] = <mu0, Q(t)^n 1> via repeated squaring.
inline Complex charfn_S(const FiniteChain& chain, double t, long n,
                        const Vector& initial_law) {
  const auto kernel = fourier_kernel(chain, t);
  const CMatrix power = matrix_power(kernel.matrix, n);
  return (initial_law.cast<Complex>().transpose() * power *
          CVector::Ones(chain.states()))(0);
}

struct RatioPointS {
  long n = 0;
  double ratio = 0.0;
  double arg_t = 0.0;
};

// R_S(n) = max over 0 < |t| <= sqrt(n) of
// |E_nu[e^{i t S_n/(sigma sqrt n)}] - e^{-t^2/2}| sqrt(n)/|t|.
inline std::vector<RatioPointS> cor41_ratio(const FiniteChain& chain,
                                            const PoissonSolution& sol,
                                            const std::vector<long>& n_grid,
                                            int t_per_n) {
  if (sol.sigma2 <= 0.0) throw DegenerateVariance("sigma2 = 0");
  const double sigma = std::sqrt(sol.sigma2);
  std::vector<RatioPointS> out;
  for (long n : n_grid) {
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    RatioPointS pt;
    pt.n = n;
    for (int j = 0; j < t_per_n; ++j) {
      const double t =
          sqrt_n * std::pow(10.0, -3.0 + 3.0 * (j + 1.0) / t_per_n);
      const Complex charfn =
          charfn_S(chain, t / (sigma * sqrt_n), n, chain.stationary);
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

// Dynamic program over (state, accumulated integer site).
inline LatticeDistribution exact_sn_distribution(
    const FiniteChain& chain, long n, const Vector& initial_law,
    double budget_cells = 1e8) {
  if (!chain.lattice) throw NoLattice("observable is not lattice-valued");
  const auto& lat = *chain.lattice;
  const Eigen::Index d = chain.states();
  long k_max = 0;
  for (long k : lat.sites) k_max = std::max(k_max, k);
  const long sites = n * k_max + 1;
  if (static_cast<double>(n) * static_cast<double>(sites) *
          static_cast<double>(d) >
      budget_cells)
    throw BudgetExceeded("DP would need " +
                         std::to_string(static_cast<double>(n) * sites * d) +
                         " cells");

  // table[x][s]: P(X_k = x, sum of sites so far = s)
  std::vector<std::vector<double>> cur(
      static_cast<size_t>(d), std::vector<double>(static_cast<size_t>(sites), 0.0));
  for (Eigen::Index x = 0; x < d; ++x) cur[x][0] = initial_law[x];
  std::vector<std::vector<double>> next(cur);
  long max_site = 0;
  for (long step = 1; step <= n; ++step) {
    const long reach = max_site + k_max;
    for (Eigen::Index y = 0; y < d; ++y)
      std::fill(next[y].begin(), next[y].begin() + (reach + 1), 0.0);
    for (Eigen::Index x = 0; x < d; ++x)
      for (long s = 0; s <= max_site; ++s) {
        const double p = cur[x][static_cast<size_t>(s)];
        if (p == 0.0) continue;
        for (Eigen::Index y = 0; y < d; ++y)
          next[y][static_cast<size_t>(s + lat.sites[static_cast<size_t>(y)])] +=
              p * chain.kernel(x, y);
      }
    max_site = reach;
    std::swap(cur, next);
  }

  LatticeDistribution dist;
  dist.offset = static_cast<double>(n) * lat.offset;
  dist.step = lat.step;
  dist.n = n;
  dist.probs.assign(static_cast<size_t>(sites), 0.0);
  for (Eigen::Index x = 0; x < d; ++x)
    for (long s = 0; s < sites; ++s)
      dist.probs[static_cast<size_t>(s)] += cur[x][static_cast<size_t>(s)];
  return dist;
}

// Characteristic sum of the exact lattice law, for cross-checks.
inline Complex lattice_charfn(const LatticeDistribution& dist, double t) {
  Complex acc = 0.0;
  for (size_t s = 0; s < dist.probs.size(); ++s)
    acc += dist.probs[s] *
           std::exp(Complex(0.0, t * (dist.offset +
                                      dist.step * static_cast<double>(s))));
  return acc;
}

// sup_x |P(S_n/(sigma sqrt n) <= x) - Phi(x)|, evaluated at both sides of
// every atom.
inline double kolmogorov_distance(const LatticeDistribution& dist,
                                  double sigma) {
  if (sigma <= 0.0) throw DegenerateVariance("sigma must be positive");
  const double scale = sigma * std::sqrt(static_cast<double>(dist.n));
  double cum = 0.0, worst = 0.0;
  for (size_t s = 0; s < dist.probs.size(); ++s) {
    if (dist.probs[s] == 0.0) continue;
    const double x =
        (dist.offset + dist.step * static_cast<double>(s)) / scale;
    const double phi = normal_cdf(x);
    worst = std::max(worst, std::abs(cum - phi));  // left limit
    cum += dist.probs[s];
    worst = std::max(worst, std::abs(cum - phi));  // at the atom
  }
  return worst;
}

struct EmpiricalKolmogorov {
  double distance = 0.0;
  double dkw_epsilon = 0.0;
};

// Empirical-CDF sup-distance to the standard normal plus a DKW band of
// half-width sqrt(ln(2/delta) / (2m)).
inline EmpiricalKolmogorov empirical_kolmogorov(std::vector<double> samples,
                                                double delta) {
  const size_t m = samples.size();
  if (m < 100) throw TooFewSamples("need at least 100 samples");
  if (delta <= 0.0 || delta >= 1.0)
    throw ConfigInvalid("delta must be in (0,1)");
  std::sort(samples.begin(), samples.end());
  double d = 0.0;
  for (size_t i = 0; i < m; ++i) {
    const double phi = normal_cdf(samples[i]);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / m - phi,
                             phi - static_cast<double>(i) / m));
  }
  return {d, std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)))};
}

struct BerryEsseenIntegral {
  double a_n = 0.0;  // integral of |charfn - gaussian| / |t|
  double i_n = 0.0;  // dominant-eigenvalue part
  double j_n = 0.0;  // L(u) part
  double k_n = 0.0;  // remainder-operator part
  double decomposition_residual = 0.0;  // integral of the route mismatch
  long panels = 0;
};

// A_n = int_{-alpha sqrt n}^{alpha sqrt n} |E[e^{it S_hat_n/sqrt n}] -
// e^{-t^2/2}| / |t| dt with S_hat = S/sigma, split through the spectral
// decomposition: charfn = lambda^n (1 + L) + <mu0, N^n 1> at u = t/sqrt(n),
// L(u) = <phi(u),1><mu0,v(u)> - 1. The split identity holds pointwise; the
// component integrals I, J, K each carry their own absolute value, so they
// upper-bound A_n while the residual measures the pointwise mismatch of the
// two computation routes.
inline BerryEsseenIntegral berry_esseen_integral(const FiniteChain& chain,
                                                 const PoissonSolution& sol,
                                                 double alpha, long n,
                                                 const Vector& initial_law,
                                                 long initial_panels = 4096,
                                                 double rel_tol = 1e-8) {
  if (sol.sigma2 <= 0.0) throw DegenerateVariance("sigma2 = 0");
  const double sigma = std::sqrt(sol.sigma2);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double t_max = alpha * sqrt_n;
  const CVector ones = CVector::Ones(chain.states());
  const Eigen::RowVectorXcd mu0 = initial_law.cast<Complex>().transpose();

  struct Integrands {
    double a, i, j, k, resid;
  };
  const auto eval = [&](double t) -> Integrands {
    // every numerator is O(t^2), so the integrands vanish at t = 0; the
    // cutoff also guards nodes that miss zero by floating-point roundoff
    if (std::abs(t) <= 1e-9) return {0.0, 0.0, 0.0, 0.0, 0.0};
    const double u = t / (sigma * sqrt_n);  // raw Fourier parameter
    SpectralTriple triple;
    try {
      triple = dominant_triple(fourier_kernel(chain, u), chain);
    } catch (const AmbiguousDominant&) {
      throw SpectralGapLost("ambiguous dominant eigenvalue at t=" +
                            std::to_string(t));
    }
    const Complex gauss = std::exp(-t * t / 2.0);
    const Complex lam_n = std::pow(triple.lambda, static_cast<double>(n));
    const Complex l_u = (triple.phi.transpose() * ones)(0) *
                            (mu0 * triple.v)(0) -
                        Complex(1.0, 0.0);
    const CMatrix n_pow = matrix_power(triple.remainder, n);
    const Complex rem = (mu0 * n_pow * ones)(0);
    const Complex direct = (mu0 * matrix_power(
                                fourier_kernel(chain, u).matrix, n) *
                            ones)(0) -
                           gauss;
    const Complex spectral = (lam_n - gauss) + lam_n * l_u + rem;
    const double at = std::abs(t);
    return {std::abs(direct) / at, std::abs(lam_n - gauss) / at,
            std::abs(lam_n * l_u) / at, std::abs(rem) / at,
            std::abs(direct - spectral) / at};
  };

  // composite Simpson over [-t_max, t_max], doubling panels until stable
  const auto integrate = [&](long panels) -> Integrands {
    const double h = 2.0 * t_max / static_cast<double>(panels);
    Integrands acc{0, 0, 0, 0, 0};
    for (long p = 0; p < panels; ++p) {
      const double a = -t_max + h * static_cast<double>(p);
      const Integrands fa = eval(a);
      const Integrands fm = eval(a + 0.5 * h);
      const Integrands fb = eval(a + h);
      acc.a += h / 6.0 * (fa.a + 4.0 * fm.a + fb.a);
      acc.i += h / 6.0 * (fa.i + 4.0 * fm.i + fb.i);
      acc.j += h / 6.0 * (fa.j + 4.0 * fm.j + fb.j);
      acc.k += h / 6.0 * (fa.k + 4.0 * fm.k + fb.k);
      acc.resid += h / 6.0 * (fa.resid + 4.0 * fm.resid + fb.resid);
    }
    return acc;
  };

  long panels = initial_panels;
  Integrands prev = integrate(panels);
  for (int round = 0; round < 4; ++round) {
    const Integrands cur = integrate(panels * 2);
    const double change =
        std::abs(cur.a - prev.a) / std::max(std::abs(cur.a), 1e-300);
    prev = cur;
    panels *= 2;
    if (change < rel_tol) break;
  }
  return {prev.a, prev.i, prev.j, prev.k, prev.resid, panels};
}

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;
  std::vector<double> residuals;
};

// OLS on (ln n, ln distance).
inline SlopeFit rate_slope_fit(const std::vector<long>& n_grid,
                               const std::vector<double>& distances) {
  if (n_grid.size() != distances.size())
    throw DimensionMismatch("grid and distance sizes differ");
  if (n_grid.size() < 4) throw ConfigInvalid("need at least 4 grid points");
  for (double d : distances)
    if (d <= 0.0) throw NonPositiveDistance("distance must be positive");
  const size_t m = n_grid.size();
  Matrix x(m, 2);
  Vector y(m);
  for (size_t i = 0; i < m; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = std::log(static_cast<double>(n_grid[i]));
    y[i] = std::log(distances[i]);
  }
  const auto [beta, se] = ols(x, y);
  SlopeFit fit;
  fit.intercept = beta[0];
  fit.slope = beta[1];
  fit.stderr_ = se[1];
  const Vector resid = y - x * beta;
  fit.residuals.assign(resid.data(), resid.data() + resid.size());
  return fit;
}

struct RateReport {
  std::vector<long> n_grid;
  std::vector<double> distances;
  std::string method;  // "exact-dp" or "mc-dkw"
  std::vector<double> band_low;   // empty for exact
  std::vector<double> band_high;
  SlopeFit fit;
};

// Largest alpha <= alpha_cap such that the dominant eigenvalue of Q(u)
// stays separated on [-alpha, alpha], scanned at scan_points.
inline double default_alpha(const FiniteChain& chain, double sigma,
                            double alpha_cap = 0.0, int scan_points = 64,
                            double gap_min = 1e-6) {
  if (alpha_cap <= 0.0) alpha_cap = 0.5 / sigma;
  double alpha = 0.0;
  for (int j = 1; j <= scan_points; ++j) {
    const double a = alpha_cap * static_cast<double>(j) / scan_points;
    try {
      (void)dominant_triple(fourier_kernel(chain, a / sigma), chain, gap_min);
      (void)dominant_triple(fourier_kernel(chain, -a / sigma), chain,
                            gap_min);
    } catch (const Error&) {
      break;
    }
    alpha = a;
  }
  return alpha;
}

}  // namespace cltlab
