#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "cltlab/chain.hpp"

namespace cltlab {

// splitmix64; also the PRNG used for path generation so that streams are
// reproducible across compilers and standard libraries.
struct SplitMix64 {
  uint64_t state = 0;

  uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // standard normal, Box-Muller (fresh pair each call, no cached state)
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }
};

// Seed derivation contract (documented in the README): hash the master seed
// once with splitmix64, xor in the offset path index, hash again. Identical
// (master_seed, path_index) gives an identical stream regardless of how
// paths are scheduled across workers.
inline uint64_t derive_path_seed(uint64_t master_seed, uint64_t path_index) {
  SplitMix64 a{master_seed};
  const uint64_t h = a.next();
  SplitMix64 b{h ^ (path_index + 0x9E3779B97F4A7C15ULL)};
  return b.next();
}

struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct FinitePath {
  uint64_t seed = 0;
  uint64_t path_index = 0;
  std::vector<int> states;         // X_0 .. X_n
  std::vector<double> partial_sums;  // S_1 .. S_n
};

inline int sample_index(const Vector& cdf, double u) {
  int lo = 0, hi = static_cast<int>(cdf.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (u < cdf[mid]) hi = mid;
    else lo = mid + 1;
  }
  return lo;
}

inline Vector row_cdfs_column(const Vector& probs) {
  Vector cdf(probs.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  cdf[probs.size() - 1] = 1.0;
  return cdf;
}

inline FinitePath simulate_finite(const FiniteChain& chain, long n,
                                  uint64_t master_seed, uint64_t path_index,
                                  const Vector& initial_law) {
  if (initial_law.size() != chain.states() || initial_law.minCoeff() < 0.0 ||
      std::abs(initial_law.sum() - 1.0) > 1e-9)
    throw BadInitialLaw("initial law is not a probability vector");
  std::vector<Vector> row_cdf;
  for (Eigen::Index x = 0; x < chain.states(); ++x)
    row_cdf.push_back(row_cdfs_column(chain.kernel.row(x).transpose()));
  const Vector init_cdf = row_cdfs_column(initial_law);

  FinitePath path;
  path.seed = derive_path_seed(master_seed, path_index);
  path.path_index = path_index;
  SplitMix64 rng{path.seed};
  int x = sample_index(init_cdf, rng.uniform());
  path.states.push_back(x);
  KahanSum s;
  for (long k = 0; k < n; ++k) {
    x = sample_index(row_cdf[x], rng.uniform());
    path.states.push_back(x);
    s.add(chain.observable[x]);
    path.partial_sums.push_back(s.sum);
  }
  return path;
}

// --- samplers for affine models ------------------------------------------

struct ScalarSampler {
  enum class Kind { Constant, Uniform, Gaussian, Discrete } kind =
      Kind::Constant;
  double value = 0.0;              // constant
  double low = 0.0, high = 1.0;    // uniform
  double mean = 0.0, stddev = 1.0; // gaussian
  std::vector<double> values;      // discrete
  std::vector<double> probs;

  bool deterministic() const { return kind == Kind::Constant; }

  double draw(SplitMix64& rng) const {
    switch (kind) {
      case Kind::Constant: return value;
      case Kind::Uniform: return low + (high - low) * rng.uniform();
      case Kind::Gaussian: return mean + stddev * rng.normal();
      case Kind::Discrete: {
        const double u = rng.uniform();
        double acc = 0.0;
        for (size_t i = 0; i < values.size(); ++i) {
          acc += probs[i];
          if (u < acc) return values[i];
        }
        return values.back();
      }
    }
    throw SamplerFailure("unknown sampler kind");
  }
};

// Matrix sampler: either a fixed matrix or i.i.d. entries from a scalar law.
struct MatrixSampler {
  Eigen::Index dim = 1;
  bool fixed = false;
  Matrix fixed_value;
  ScalarSampler entry;

  bool deterministic() const { return fixed || entry.deterministic(); }

  Matrix draw(SplitMix64& rng) const {
    if (fixed) return fixed_value;
    Matrix m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = entry.draw(rng);
    return m;
  }
};

struct VectorSampler {
  Eigen::Index dim = 1;
  bool fixed = false;
  Vector fixed_value;
  ScalarSampler entry;

  Vector draw(SplitMix64& rng) const {
    if (fixed) return fixed_value;
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = entry.draw(rng);
    return v;
  }
};

struct Observable {
  enum class Kind { Coordinate, Norm, CenteredNorm, PiecewiseLinear } kind =
      Kind::Coordinate;
  Eigen::Index coordinate = 0;
  // piecewise-linear table over the first coordinate
  std::vector<double> knots_x;
  std::vector<double> knots_y;

  double raw(const Vector& x) const {
    switch (kind) {
      case Kind::Coordinate: return x[coordinate];
      case Kind::Norm:
      case Kind::CenteredNorm: return x.norm();
      case Kind::PiecewiseLinear: {
        const double v = x[0];
        if (v <= knots_x.front()) return knots_y.front();
        if (v >= knots_x.back()) return knots_y.back();
        for (size_t i = 1; i < knots_x.size(); ++i)
          if (v <= knots_x[i]) {
            const double w =
                (v - knots_x[i - 1]) / (knots_x[i] - knots_x[i - 1]);
            return knots_y[i - 1] + w * (knots_y[i] - knots_y[i - 1]);
          }
        return knots_y.back();
      }
    }
    throw SamplerFailure("unknown observable kind");
  }

  // Lipschitz constant w.r.t. the Euclidean metric
  double lipschitz() const {
    switch (kind) {
      case Kind::Coordinate:
      case Kind::Norm:
      case Kind::CenteredNorm: return 1.0;
      case Kind::PiecewiseLinear: {
        double c = 0.0;
        for (size_t i = 1; i < knots_x.size(); ++i)
          c = std::max(c, std::abs(knots_y[i] - knots_y[i - 1]) /
                              (knots_x[i] - knots_x[i - 1]));
        return c;
      }
    }
    return 0.0;
  }
};

struct InitialLaw {
  enum class Kind { Point, Gaussian } kind = Kind::Point;
  Vector point;          // Point
  Vector mean;           // Gaussian, diagonal covariance
  Vector stddev;

  Vector draw(SplitMix64& rng, Eigen::Index dim) const {
    if (kind == Kind::Point)
      return point.size() == dim ? point : Vector::Zero(dim);
    Vector x(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      x[i] = mean[i] + stddev[i] * rng.normal();
    return x;
  }
};

// X_n = A_n X_{n-1} + b_n with i.i.d. (A_n, b_n).
struct AffineModel {
  Eigen::Index dim = 1;
  MatrixSampler a;
  VectorSampler b;
  Observable observable;
  double center = 0.0;      // xi = observable.raw - center
  bool center_known = false;
  InitialLaw initial_law;
};

struct AffinePath {
  uint64_t seed = 0;
  uint64_t path_index = 0;
  std::vector<Vector> states;        // X_0 .. X_n
  std::vector<double> partial_sums;  // S_1 .. S_n
};

inline AffinePath simulate_affine(const AffineModel& model, long n,
                                  uint64_t master_seed, uint64_t path_index) {
  AffinePath path;
  path.seed = derive_path_seed(master_seed, path_index);
  path.path_index = path_index;
  SplitMix64 rng{path.seed};
  Vector x = model.initial_law.draw(rng, model.dim);
  path.states.push_back(x);
  KahanSum s;
  for (long k = 0; k < n; ++k) {
    x = model.a.draw(rng) * x + model.b.draw(rng);
    path.states.push_back(x);
    s.add(model.observable.raw(x) - model.center);
    path.partial_sums.push_back(s.sum);
  }
  return path;
}

// Memory-light variant: only the partial sums at the requested checkpoints.
inline std::vector<double> simulate_affine_checkpoints(
    const AffineModel& model, const std::vector<long>& checkpoints,
    uint64_t master_seed, uint64_t path_index) {
  SplitMix64 rng{derive_path_seed(master_seed, path_index)};
  Vector x = model.initial_law.draw(rng, model.dim);
  std::vector<double> out;
  KahanSum s;
  long k = 0;
  for (long target : checkpoints) {
    for (; k < target; ++k) {
      x = model.a.draw(rng) * x + model.b.draw(rng);
      s.add(model.observable.raw(x) - model.center);
    }
    out.push_back(s.sum);
  }
  return out;
}

// Operator (spectral) norm via power iteration on A^T A.
inline double operator_norm(const Matrix& a, double tol = 1e-10,
                            int max_iter = 1000) {
  if (a.rows() == 1) return std::abs(a(0, 0));
  const Matrix ata = a.transpose() * a;
  Vector v = Vector::Ones(a.cols()).normalized();
  double prev = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = ata * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(norm - prev) < tol * std::max(1.0, norm)) return std::sqrt(norm);
    prev = norm;
  }
  return std::sqrt(prev);
}

struct MomentEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct ConditionStarEstimate {
  MomentEstimate i1;  // E_pi[ Gamma(g)^3 (1 + c(g)^{1/2}) ]
  MomentEstimate i2;  // E_{pi^{*n0}}[ c^{1/2} max{c,1}^3 ]
  bool pass = false;
};

// Monte Carlo check of the contraction/moment condition for iterated
// Lipschitz maps; for affine maps c(g) = ||A|| and d(g x0, x0) = ||b|| with
// x0 the origin.
inline ConditionStarEstimate condition_star_estimate(const AffineModel& model,
                                                     long n0, long samples,
                                                     uint64_t master_seed) {
  if (n0 < 1 || samples < 1)
    throw SamplerFailure("n0 and samples must be positive");
  KahanSum s1, s1sq, s2, s2sq;
  const bool deterministic = model.a.deterministic() &&
                             (model.b.fixed || model.b.entry.deterministic());
  const long m = deterministic ? 1 : samples;
  for (long i = 0; i < m; ++i) {
    SplitMix64 rng{derive_path_seed(master_seed, static_cast<uint64_t>(i))};
    // single draw for I1
    {
      const Matrix a = model.a.draw(rng);
      const Vector b = model.b.draw(rng);
      const double c = operator_norm(a);
      const double gamma = 1.0 + c + b.norm();
      const double v = gamma * gamma * gamma * (1.0 + std::sqrt(c));
      s1.add(v);
      s1sq.add(v * v);
    }
    // n0-fold composition for I2
    {
      Matrix a_comp = Matrix::Identity(model.dim, model.dim);
      for (long j = 0; j < n0; ++j) a_comp = model.a.draw(rng) * a_comp;
      const double c = operator_norm(a_comp);
      const double mc = std::max(c, 1.0);
      const double v = std::sqrt(c) * mc * mc * mc;
      s2.add(v);
      s2sq.add(v * v);
    }
  }
  const auto finish = [m](const KahanSum& s, const KahanSum& ssq) {
    MomentEstimate e;
    e.mean = s.sum / static_cast<double>(m);
    if (m > 1) {
      const double var =
          std::max(0.0, (ssq.sum - static_cast<double>(m) * e.mean * e.mean) /
                            static_cast<double>(m - 1));
      e.stderr_ = std::sqrt(var / static_cast<double>(m));
    }
    return e;
  };
  ConditionStarEstimate out;
  out.i1 = finish(s1, s1sq);
  out.i2 = finish(s2, s2sq);
  out.pass = out.i2.mean + 2.0 * out.i2.stderr_ < 1.0;
  return out;
}

struct VarianceEstimate {
  double sigma2_hat = 0.0;
  double stderr_ = 0.0;
};

// sigma2 from data: sample variance of S_n / sqrt(n) across paths, with the
// fourth-moment asymptotic standard error.
inline VarianceEstimate mc_variance_estimate(const std::vector<double>& s_n,
                                             long n) {
  const size_t m = s_n.size();
  if (m < 100) throw TooFewPaths("need at least 100 paths");
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  KahanSum mean_acc;
  for (double s : s_n) mean_acc.add(s / sqrt_n);
  const double mean = mean_acc.sum / static_cast<double>(m);
  KahanSum m2, m4;
  for (double s : s_n) {
    const double d = s / sqrt_n - mean;
    m2.add(d * d);
    m4.add(d * d * d * d);
  }
  VarianceEstimate out;
  out.sigma2_hat = m2.sum / static_cast<double>(m - 1);
  const double mu4 = m4.sum / static_cast<double>(m);
  out.stderr_ = std::sqrt(std::max(
      0.0, (mu4 - out.sigma2_hat * out.sigma2_hat) / static_cast<double>(m)));
  return out;
}

}  // namespace cltlab
