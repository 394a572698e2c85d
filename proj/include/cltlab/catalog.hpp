#pragma once

#include <json.hpp>
#include <string>

#include "cltlab/chain.hpp"
#include "cltlab/models.hpp"

namespace cltlab {
namespace catalog {

// two-state kernel [[1-a, a], [b, 1-b]] with raw observable (1, 0)
inline FiniteChain two_state(double a, double b) {
  Matrix q(2, 2);
  q << 1.0 - a, a, b, 1.0 - b;
  Vector xi(2);
  xi << 1.0, 0.0;
  return build_chain(q, xi);
}

// rank-one kernel: every row equals p
inline FiniteChain iid(const Vector& p, const Vector& xi) {
  const Eigen::Index n = p.size();
  Matrix q(n, n);
  for (Eigen::Index x = 0; x < n; ++x) q.row(x) = p.transpose();
  return build_chain(q, xi);
}

// symmetric two-point +-1 i.i.d. chain (sigma2 = 1)
inline FiniteChain iid_rademacher() {
  Vector p(2), xi(2);
  p << 0.5, 0.5;
  xi << 1.0, -1.0;
  return iid(p, xi);
}

// random strictly positive kernel and observable; entries from (0.1, 1.1)
// so the chain mixes fast
inline FiniteChain random_chain(Eigen::Index states, uint64_t seed) {
  SplitMix64 rng{seed};
  Matrix q(states, states);
  for (Eigen::Index x = 0; x < states; ++x) {
    double row = 0.0;
    for (Eigen::Index y = 0; y < states; ++y) {
      q(x, y) = 0.1 + rng.uniform();
      row += q(x, y);
    }
    q.row(x) /= row;
  }
  Vector xi(states);
  for (Eigen::Index x = 0; x < states; ++x) xi[x] = 2.0 * rng.uniform() - 1.0;
  return build_chain(q, xi);
}

// Gaussian AR(1) transition projected onto a uniform grid on [-x_max, x_max];
// boundary mass folded into the edge cells, rows renormalized.
inline FiniteChain discretized_ar1(double a, double s, Eigen::Index grid_size,
                                   double x_max) {
  Vector centers(grid_size);
  const double dx = 2.0 * x_max / static_cast<double>(grid_size);
  for (Eigen::Index i = 0; i < grid_size; ++i)
    centers[i] = -x_max + dx * (static_cast<double>(i) + 0.5);
  Matrix q(grid_size, grid_size);
  for (Eigen::Index x = 0; x < grid_size; ++x) {
    const double mean = a * centers[x];
    for (Eigen::Index y = 0; y < grid_size; ++y) {
      const double lo = (centers[y] - 0.5 * dx - mean) / s;
      const double hi = (centers[y] + 0.5 * dx - mean) / s;
      double mass = 0.5 * (std::erf(hi / std::numbers::sqrt2) -
                           std::erf(lo / std::numbers::sqrt2));
      if (y == 0)
        mass += 0.5 * (1.0 + std::erf(lo / std::numbers::sqrt2));
      if (y == grid_size - 1)
        mass += 0.5 * (1.0 - std::erf(hi / std::numbers::sqrt2));
      q(x, y) = mass;
    }
    q.row(x) /= q.row(x).sum();
  }
  return build_chain(q, centers);
}

// scalar AR(1) X_n = a X_{n-1} + s N(0,1), xi(x) = x, started from the
// exact stationary law
inline AffineModel ar1_scalar(double a, double s) {
  AffineModel model;
  model.dim = 1;
  model.a.dim = 1;
  model.a.fixed = true;
  model.a.fixed_value = Matrix::Constant(1, 1, a);
  model.b.dim = 1;
  model.b.entry.kind = ScalarSampler::Kind::Gaussian;
  model.b.entry.mean = 0.0;
  model.b.entry.stddev = s;
  model.observable.kind = Observable::Kind::Coordinate;
  model.center = 0.0;
  model.center_known = true;
  model.initial_law.kind = InitialLaw::Kind::Gaussian;
  model.initial_law.mean = Vector::Zero(1);
  model.initial_law.stddev =
      Vector::Constant(1, s / std::sqrt(1.0 - a * a));
  return model;
}

// A = 0, Rademacher b: an i.i.d. +-1 sum in affine-model clothing
inline AffineModel iid_rademacher_affine() {
  AffineModel model;
  model.dim = 1;
  model.a.dim = 1;
  model.a.fixed = true;
  model.a.fixed_value = Matrix::Zero(1, 1);
  model.b.dim = 1;
  model.b.entry.kind = ScalarSampler::Kind::Discrete;
  model.b.entry.values = {1.0, -1.0};
  model.b.entry.probs = {0.5, 0.5};
  model.observable.kind = Observable::Kind::Coordinate;
  model.center = 0.0;
  model.center_known = true;
  model.initial_law.kind = InitialLaw::Kind::Point;
  model.initial_law.point = Vector::Zero(1);
  return model;
}

}  // namespace catalog

// --- JSON ingestion --------------------------------------------------------

inline Matrix parse_matrix(const nlohmann::json& j) {
  const size_t rows = j.size();
  if (rows == 0) throw ConfigInvalid("empty matrix");
  const size_t cols = j.at(0).size();
  Matrix m(rows, cols);
  for (size_t x = 0; x < rows; ++x) {
    if (j.at(x).size() != cols) throw ConfigInvalid("ragged matrix");
    for (size_t y = 0; y < cols; ++y) m(x, y) = j.at(x).at(y).get<double>();
  }
  return m;
}

inline Vector parse_vector(const nlohmann::json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

// {"kernel": [[...]], "observable": [...], "weight": [...]?}
inline FiniteChain chain_from_json(const nlohmann::json& j) {
  if (!j.contains("kernel") || !j.contains("observable"))
    throw ConfigInvalid("chain spec needs kernel and observable");
  std::optional<Vector> weight;
  if (j.contains("weight")) weight = parse_vector(j.at("weight"));
  return build_chain(parse_matrix(j.at("kernel")),
                     parse_vector(j.at("observable")), weight);
}

inline ScalarSampler scalar_sampler_from_json(const nlohmann::json& j) {
  ScalarSampler s;
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") {
    s.kind = ScalarSampler::Kind::Constant;
    s.value = j.at("value").get<double>();
  } else if (type == "uniform") {
    s.kind = ScalarSampler::Kind::Uniform;
    s.low = j.at("low").get<double>();
    s.high = j.at("high").get<double>();
  } else if (type == "gaussian") {
    s.kind = ScalarSampler::Kind::Gaussian;
    s.mean = j.value("mean", 0.0);
    s.stddev = j.at("stddev").get<double>();
  } else if (type == "discrete") {
    s.kind = ScalarSampler::Kind::Discrete;
    for (const auto& v : j.at("values")) s.values.push_back(v.get<double>());
    for (const auto& p : j.at("probs")) s.probs.push_back(p.get<double>());
    if (s.values.size() != s.probs.size() || s.values.empty())
      throw ConfigInvalid("discrete sampler values/probs mismatch");
  } else {
    throw ConfigInvalid("unknown sampler type: " + type);
  }
  return s;
}

// {"type": "affine", "dim": d, "A": {...}, "b": {...}, "observable": "...",
//  "x0": [...]?, "center": c?, "initial": {...}?}
inline AffineModel affine_from_json(const nlohmann::json& j) {
  AffineModel model;
  model.dim = j.value("dim", 1);
  const auto& ja = j.at("A");
  model.a.dim = model.dim;
  if (ja.at("type").get<std::string>() == "constant" &&
      ja.contains("matrix")) {
    model.a.fixed = true;
    model.a.fixed_value = parse_matrix(ja.at("matrix"));
  } else {
    model.a.entry = scalar_sampler_from_json(ja);
  }
  const auto& jb = j.at("b");
  model.b.dim = model.dim;
  if (jb.at("type").get<std::string>() == "constant" &&
      jb.contains("vector")) {
    model.b.fixed = true;
    model.b.fixed_value = parse_vector(jb.at("vector"));
  } else {
    model.b.entry = scalar_sampler_from_json(jb);
  }
  const std::string obs = j.value("observable", "coordinate");
  if (obs == "coordinate") {
    model.observable.kind = Observable::Kind::Coordinate;
    model.observable.coordinate = j.value("coordinate", 0);
  } else if (obs == "norm") {
    model.observable.kind = Observable::Kind::Norm;
  } else if (obs == "centered-norm") {
    model.observable.kind = Observable::Kind::CenteredNorm;
  } else if (obs == "piecewise-linear") {
    model.observable.kind = Observable::Kind::PiecewiseLinear;
    for (const auto& v : j.at("knots_x"))
      model.observable.knots_x.push_back(v.get<double>());
    for (const auto& v : j.at("knots_y"))
      model.observable.knots_y.push_back(v.get<double>());
  } else {
    throw ConfigInvalid("unknown observable: " + obs);
  }
  if (j.contains("center")) {
    model.center = j.at("center").get<double>();
    model.center_known = true;
  }
  if (j.contains("initial")) {
    const auto& ji = j.at("initial");
    const std::string kind = ji.at("type").get<std::string>();
    if (kind == "point") {
      model.initial_law.kind = InitialLaw::Kind::Point;
      model.initial_law.point = parse_vector(ji.at("value"));
    } else if (kind == "gaussian") {
      model.initial_law.kind = InitialLaw::Kind::Gaussian;
      model.initial_law.mean = parse_vector(ji.at("mean"));
      model.initial_law.stddev = parse_vector(ji.at("stddev"));
    } else {
      throw ConfigInvalid("unknown initial law: " + kind);
    }
  } else {
    model.initial_law.kind = InitialLaw::Kind::Point;
    model.initial_law.point = Vector::Zero(model.dim);
  }
  return model;
}

// Pilot-run centering for continuous models when no exact mean is supplied.
struct CenteringEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline CenteringEstimate pilot_center(const AffineModel& model,
                                      uint64_t master_seed,
                                      long steps = 1000000,
                                      long burn_in = 10000) {
  SplitMix64 rng{derive_path_seed(master_seed, 0xC0FFEEULL)};
  Vector x = model.initial_law.draw(rng, model.dim);
  for (long k = 0; k < burn_in; ++k)
    x = model.a.draw(rng) * x + model.b.draw(rng);
  KahanSum s, ssq;
  for (long k = 0; k < steps; ++k) {
    x = model.a.draw(rng) * x + model.b.draw(rng);
    const double v = model.observable.raw(x);
    s.add(v);
    ssq.add(v * v);
  }
  CenteringEstimate out;
  out.mean = s.sum / static_cast<double>(steps);
  const double var =
      std::max(0.0, ssq.sum / static_cast<double>(steps) - out.mean * out.mean);
  // i.i.d. stderr; correlated samples make this an underestimate, which the
  // report records as-is
  out.stderr_ = std::sqrt(var / static_cast<double>(steps));
  return out;
}

}  // namespace cltlab
