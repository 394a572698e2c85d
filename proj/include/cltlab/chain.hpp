#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cltlab/errors.hpp"
#include "cltlab/linalg.hpp"

namespace cltlab {

struct Lattice {
  double offset = 0.0;
  double step = 1.0;
  std::vector<long> sites;  // observable[x] = offset + step * sites[x]
};

// Finite state space, row-stochastic kernel, stationary law, centered
// observable, optional weight. Immutable after construction.
struct FiniteChain {
  Matrix kernel;
  Vector stationary;
  Vector observable;  // nu-centered
  Vector weight;      // positive, defaults to all-ones
  std::optional<Lattice> lattice;
  bool periodic_warning = false;

  Eigen::Index states() const { return kernel.rows(); }
  double nu(const Vector& f) const { return stationary.dot(f); }
};

struct StationaryResult {
  Vector pi;
  bool periodic_warning = false;
};

struct ErgodicityCertificate {
  double kappa0 = 0.0;
  double C = 0.0;
  long n_checked = 0;

  // Roundoff slack used when replaying the geometric bound.
  static constexpr double slack = 1e-13;

  bool verify(const FiniteChain& chain, const Vector& f) const {
    const double nf = weighted_norm(f, chain.weight);
    Vector g = f;
    double bound = C;
    for (long n = 1; n <= n_checked; ++n) {
      g = chain.kernel * g;
      bound *= kappa0;
      Vector dev = g - Vector::Constant(g.size(), chain.nu(f));
      if (weighted_norm(dev, chain.weight) > bound * nf + slack * nf)
        return false;
    }
    return true;
  }
};

namespace detail {

inline double real_gcd(double a, double b, double tol) {
  a = std::abs(a);
  b = std::abs(b);
  while (b > tol) {
    double r = std::fmod(a, b);
    // fmod can return values just below b from roundoff
    if (r > b - tol) r = 0.0;
    a = b;
    b = r;
  }
  return a;
}

inline std::optional<Lattice> detect_lattice(const Vector& xi, double tol) {
  const Eigen::Index n = xi.size();
  double span = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    span = std::max(span, std::abs(xi[i] - xi[0]));
  if (span <= tol) {
    Lattice lat{xi[0], 1.0, std::vector<long>(static_cast<size_t>(n), 0)};
    return lat;
  }
  double step = 0.0;
  for (Eigen::Index i = 1; i < n; ++i)
    step = real_gcd(step, xi[i] - xi[0], tol);
  // reject gcd artifacts from near-incommensurable values; genuine lattices
  // are re-validated at the tighter 1e-12 fit below
  if (step <= tol || span / step > 1e6) return std::nullopt;
  Lattice lat;
  lat.step = step;
  lat.offset = xi[0];
  lat.sites.resize(static_cast<size_t>(n));
  long min_site = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double raw = (xi[i] - lat.offset) / step;
    const long k = std::lround(raw);
    if (std::abs(xi[i] - (lat.offset + step * static_cast<double>(k))) >
        1e-12 * std::max(1.0, span))
      return std::nullopt;
    lat.sites[static_cast<size_t>(i)] = k;
    min_site = std::min(min_site, k);
  }
  // shift so the smallest site index is 0
  lat.offset += step * static_cast<double>(min_site);
  for (auto& k : lat.sites) k -= min_site;
  return lat;
}

}  // namespace detail

// Stationary law: solve the singular system (Q^T - I) pi = 0 with the
// normalization row appended, then cross-check by power iteration on
// (Q + I)/2 (aperiodic even when Q itself is periodic).
inline StationaryResult stationary_distribution(const Matrix& kernel) {
  const Eigen::Index n = kernel.rows();
  for (Eigen::Index x = 0; x < n; ++x) {
    const double row = kernel.row(x).sum();
    if (std::abs(row - 1.0) > 1e-9)
      throw NonStochastic("row " + std::to_string(x) + " sums to " +
                          std::to_string(row));
  }

  Eigen::EigenSolver<Matrix> es(kernel);
  int near_one = 0;
  bool periodic = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex ev = es.eigenvalues()[i];
    if (std::abs(ev - Complex(1.0, 0.0)) < 1e-9) ++near_one;
    else if (std::abs(ev) >= 1.0 - 1e-9) periodic = true;
  }
  if (near_one != 1)
    throw ReducibleChain("stationary law not unique (" +
                         std::to_string(near_one) +
                         " eigenvalues at 1)");

  Matrix a(n + 1, n);
  a.topRows(n) = kernel.transpose() - Matrix::Identity(n, n);
  a.bottomRows(1).setOnes();
  Vector b = Vector::Zero(n + 1);
  b[n] = 1.0;
  Vector pi = a.colPivHouseholderQr().solve(b);

  // power-iteration cross-check on the lazy kernel
  Matrix lazy = 0.5 * (kernel + Matrix::Identity(n, n));
  Vector p = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < 20000; ++it) {
    Vector next = lazy.transpose() * p;
    if ((next - p).lpNorm<Eigen::Infinity>() < 1e-15) {
      p = next;
      break;
    }
    p = next;
  }
  if ((p - pi).lpNorm<Eigen::Infinity>() > 1e-8)
    throw SingularSystem("linear-solve and power-iteration stationary "
                         "vectors disagree");
  return {pi, periodic};
}

inline FiniteChain build_chain(Matrix kernel, const Vector& raw_observable,
                               std::optional<Vector> weight = std::nullopt) {
  const Eigen::Index n = kernel.rows();
  if (kernel.cols() != n) throw NonStochastic("kernel not square");
  if (raw_observable.size() != n)
    throw DimensionMismatch("observable size != state count");
  if (weight && weight->size() != n)
    throw DimensionMismatch("weight size != state count");

  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) {
      if (kernel(x, y) < -1e-15)
        throw NegativeEntry("kernel entry (" + std::to_string(x) + "," +
                            std::to_string(y) + ") is negative");
      if (kernel(x, y) < 0.0) kernel(x, y) = 0.0;
    }

  StationaryResult st = stationary_distribution(kernel);

  // prune states outside the support of nu
  std::vector<Eigen::Index> keep;
  for (Eigen::Index x = 0; x < n; ++x)
    if (st.pi[x] > 1e-14) keep.push_back(x);
  FiniteChain chain;
  if (std::ssize(keep) < n) {
    const Eigen::Index m = std::ssize(keep);
    if (m < 2) throw ReducibleChain("support has fewer than 2 states");
    Matrix q(m, m);
    Vector pi(m), xi(m), w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) q(i, j) = kernel(keep[i], keep[j]);
      pi[i] = st.pi[keep[i]];
      xi[i] = raw_observable[keep[i]];
      w[i] = weight ? (*weight)[keep[i]] : 1.0;
    }
    // renormalize rows; mass into pruned states is zero up to roundoff
    for (Eigen::Index i = 0; i < m; ++i) q.row(i) /= q.row(i).sum();
    pi /= pi.sum();
    chain.kernel = q;
    chain.stationary = pi;
    chain.observable = xi;
    chain.weight = w;
  } else {
    chain.kernel = kernel;
    chain.stationary = st.pi;
    chain.observable = raw_observable;
    chain.weight = weight ? *weight : Vector::Ones(n);
  }
  chain.periodic_warning = st.periodic_warning;
  chain.observable.array() -= chain.nu(chain.observable);
  chain.lattice = detail::detect_lattice(chain.observable, 1e-9);
  return chain;
}

// kappa0 = modulus of the second-largest eigenvalue of Q (inflated by 1e-6
// when that eigenvalue is defective); C = smallest constant making the
// geometric bound hold in the W operator norm for n <= n_max.
inline ErgodicityCertificate ergodicity_constants(const FiniteChain& chain,
                                                  long n_max) {
  const Eigen::Index n = chain.states();
  Eigen::EigenSolver<Matrix> es(chain.kernel);
  std::vector<Complex> evs(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) evs[static_cast<size_t>(i)] = es.eigenvalues()[i];
  std::sort(evs.begin(), evs.end(),
            [](Complex a, Complex b) { return std::abs(a) > std::abs(b); });
  double kappa0 = n > 1 ? std::abs(evs[1]) : 0.0;
  if (kappa0 >= 1.0 - 1e-9)
    throw NoSpectralGap("second eigenvalue modulus " + std::to_string(kappa0));

  // defective second eigenvalue: repeated value among the sub-dominant ones
  bool defective = false;
  for (size_t i = 1; i < evs.size() && !defective; ++i)
    for (size_t j = i + 1; j < evs.size(); ++j)
      if (std::abs(evs[i] - evs[j]) < 1e-8 &&
          std::abs(std::abs(evs[i]) - kappa0) < 1e-8) {
        defective = true;
        break;
      }
  if (defective) kappa0 += 1e-6;
  kappa0 = std::max(kappa0, 1e-12);

  Matrix proj = Vector::Ones(n) * chain.stationary.transpose();
  Matrix power = Matrix::Identity(n, n);
  double c = 0.0;
  double kpow = 1.0;
  for (long k = 1; k <= n_max; ++k) {
    power = power * chain.kernel;
    kpow *= kappa0;
    const double dev = weighted_operator_norm(power - proj, chain.weight);
    if (dev > 1e-13)  // below the roundoff slack, no constraint
      c = std::max(c, dev / kpow);
  }
  return {kappa0, c, n_max};
}

// W = V^{1/3}, U = V^{2/3}.
inline std::pair<Vector, Vector> derive_weights(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] < 1.0)
      throw WeightBelowOne("V(" + std::to_string(i) + ") = " +
                           std::to_string(v[i]));
  Vector w = v.array().pow(1.0 / 3.0);
  Vector u = v.array().pow(2.0 / 3.0);
  return {w, u};
}

}  // namespace cltlab
