#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "cltlab/catalog.hpp"
#include "cltlab/martingale.hpp"
#include "cltlab/models.hpp"
#include "cltlab/rates.hpp"
#include "cltlab/report.hpp"
#include "cltlab/spectral.hpp"

namespace cltlab::cli {

struct ExperimentConfig {
  Json model;  // raw model spec: builtin, explicit chain, or affine

  std::vector<long> n_grid;
  std::vector<double> t_grid;  // martingale decomposition t values
  double t_max = 1.0;
  int t_per_n = 24;
  int scan_points = 33;
  long samples = 10000;
  std::vector<long> samples_grid;  // per-n override for MC rate runs
  double delta = 0.05;
  double alpha = 0.0;  // 0 = auto via default_alpha
  double sigma2 = 0.0;  // 0 = estimate from the samples
  uint64_t master_seed = 0;
  bool has_seed = false;
  long n0 = 4;
  long p_max = 30;
  long ell_max = 64;
  long residual_horizon = 30;
  double budget_cells = 1e8;
  double gap_min = 1e-6;

  std::string out_dir = ".";
  std::string format = "csv";
  bool svg = false;
  int workers = 1;
};

inline ExperimentConfig parse_config(const Json& j) {
  ExperimentConfig cfg;
  if (j.contains("model")) cfg.model = j.at("model");
  if (j.contains("n_grid")) {
    for (const auto& n : j.at("n_grid")) cfg.n_grid.push_back(n.get<long>());
    for (size_t i = 1; i < cfg.n_grid.size(); ++i)
      if (cfg.n_grid[i] <= cfg.n_grid[i - 1])
        throw ConfigInvalid("n_grid must be strictly increasing");
    for (long n : cfg.n_grid)
      if (n < 1) throw ConfigInvalid("n_grid entries must be positive");
  }
  if (j.contains("t_grid"))
    for (const auto& t : j.at("t_grid")) cfg.t_grid.push_back(t.get<double>());
  cfg.t_max = j.value("t_max", cfg.t_max);
  cfg.t_per_n = j.value("t_per_n", cfg.t_per_n);
  cfg.scan_points = j.value("scan_points", cfg.scan_points);
  cfg.samples = j.value("samples", cfg.samples);
  if (j.contains("samples_grid"))
    for (const auto& m : j.at("samples_grid"))
      cfg.samples_grid.push_back(m.get<long>());
  cfg.delta = j.value("delta", cfg.delta);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.sigma2 = j.value("sigma2", cfg.sigma2);
  if (j.contains("master_seed")) {
    cfg.master_seed = j.at("master_seed").get<uint64_t>();
    cfg.has_seed = true;
  }
  cfg.n0 = j.value("n0", cfg.n0);
  cfg.p_max = j.value("p_max", cfg.p_max);
  cfg.ell_max = j.value("ell_max", cfg.ell_max);
  cfg.residual_horizon = j.value("residual_horizon", cfg.residual_horizon);
  cfg.budget_cells = j.value("budget_cells", cfg.budget_cells);
  cfg.gap_min = j.value("gap_min", cfg.gap_min);
  if (j.contains("output")) {
    const auto& out = j.at("output");
    cfg.out_dir = out.value("directory", cfg.out_dir);
    cfg.format = out.value("format", cfg.format);
    cfg.svg = out.value("svg", cfg.svg);
    cfg.workers = out.value("workers", cfg.workers);
  }
  if (cfg.t_max <= 0.0 || cfg.delta <= 0.0 || cfg.delta >= 1.0 ||
      cfg.gap_min <= 0.0 || cfg.budget_cells <= 0.0)
    throw ConfigInvalid("tolerances and bounds must be positive");
  if (cfg.t_per_n < 1 || cfg.scan_points < 1 || cfg.workers < 1)
    throw ConfigInvalid("counts must be at least 1");
  if (cfg.format != "csv" && cfg.format != "json")
    throw ConfigInvalid("format must be csv or json");
  if (!cfg.samples_grid.empty() &&
      cfg.samples_grid.size() != cfg.n_grid.size())
    throw ConfigInvalid("samples_grid must match n_grid in length");
  return cfg;
}

inline bool model_is_affine(const Json& model) {
  if (model.contains("builtin")) {
    const std::string name = model.at("builtin").get<std::string>();
    return name == "ar1_scalar" || name == "affine_vector";
  }
  return model.value("type", "") == "affine";
}

inline FiniteChain resolve_chain(const Json& model) {
  if (model.is_null()) throw ConfigInvalid("config has no model");
  if (model.contains("builtin")) {
    const std::string name = model.at("builtin").get<std::string>();
    if (name == "two_state")
      return catalog::two_state(model.at("a").get<double>(),
                                model.at("b").get<double>());
    if (name == "iid")
      return catalog::iid(parse_vector(model.at("p")),
                          parse_vector(model.at("xi")));
    if (name == "random_chain")
      return catalog::random_chain(model.at("n").get<long>(),
                                   model.at("seed").get<uint64_t>());
    if (name == "discretized_ar1")
      return catalog::discretized_ar1(model.at("a").get<double>(),
                                      model.at("s").get<double>(),
                                      model.at("grid_size").get<long>(),
                                      model.at("x_max").get<double>());
    throw ConfigInvalid("builtin " + name + " is not a finite chain");
  }
  if (model.contains("kernel")) return chain_from_json(model);
  throw ConfigInvalid("model is not a finite chain spec");
}

inline AffineModel resolve_affine(const Json& model) {
  if (model.is_null()) throw ConfigInvalid("config has no model");
  if (model.contains("builtin")) {
    const std::string name = model.at("builtin").get<std::string>();
    if (name == "ar1_scalar")
      return catalog::ar1_scalar(model.at("a").get<double>(),
                                 model.at("s").get<double>());
    if (name == "affine_vector") return affine_from_json(model.at("spec"));
    throw ConfigInvalid("builtin " + name + " is not an affine model");
  }
  if (model.value("type", "") == "affine") return affine_from_json(model);
  throw ConfigInvalid("model is not an affine spec");
}

// Deterministic index-parallel map: results land in a preallocated slot per
// index, so the worker count never changes the output.
template <typename Fn>
void parallel_for(long count, int workers, Fn&& fn) {
  if (workers <= 1 || count < 2) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long lo = static_cast<long>(w) * chunk;
    const long hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (long i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

namespace detail {

inline void emit(const ExperimentConfig& cfg, const std::string& stem,
                 const CsvTable* csv, const Json* json) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  if (cfg.format == "csv" && csv)
    write_atomic(dir / (stem + ".csv"), csv->to_string());
  else if (json)
    write_atomic(dir / (stem + ".json"), json->dump(2) + "\n");
  else if (csv)  // json requested but only tabular data exists
    write_atomic(dir / (stem + ".csv"), csv->to_string());
}

inline int run_spectral(const ExperimentConfig& cfg) {
  const auto chain = resolve_chain(cfg.model);
  std::vector<double> grid;
  for (int j = 1; j <= cfg.scan_points; ++j)
    grid.push_back(cfg.t_max * static_cast<double>(j) / cfg.scan_points);
  const auto rows = spectral_scan(chain, grid, cfg.residual_horizon);
  CsvTable t;
  t.header = {"t", "re_lambda", "im_lambda", "abs_lambda",
              "gap", "residual_D", "b1_value", "b2_value", "b3_value"};
  Json jrows = Json::array();
  for (const auto& row : rows) {
    t.rows.push_back({format_number(row.t), format_number(row.lambda.real()),
                      format_number(row.lambda.imag()),
                      format_number(std::abs(row.lambda)),
                      format_number(row.gap), format_number(row.residual_d),
                      format_number(row.b1), format_number(row.b2),
                      format_number(row.b3)});
    jrows.push_back({{"t", row.t},
                     {"re_lambda", row.lambda.real()},
                     {"im_lambda", row.lambda.imag()},
                     {"abs_lambda", std::abs(row.lambda)},
                     {"gap", row.gap},
                     {"residual_D", row.residual_d},
                     {"b1_value", row.b1},
                     {"b2_value", row.b2},
                     {"b3_value", row.b3}});
  }
  Json j{{"schema_version", 1}, {"rows", jrows}};
  emit(cfg, "spectral", &t, &j);
  return 0;
}

inline int run_poisson(const ExperimentConfig& cfg) {
  const auto chain = resolve_chain(cfg.model);
  (void)ergodicity_constants(chain, 10);  // spectral-gap precondition
  const auto sol = solve_poisson(chain);
  const auto h2 = h2_series(chain, sol, cfg.p_max);
  Json j{{"schema_version", 1},
         {"sigma2", sol.sigma2},
         {"psi_l_inf", sol.psi.lpNorm<Eigen::Infinity>()},
         {"h2_terms", h2.terms},
         {"h2_total", h2.total}};
  emit(cfg, "poisson", nullptr, &j);
  return 0;
}

inline int run_martingale(const ExperimentConfig& cfg) {
  const auto chain = resolve_chain(cfg.model);
  const auto sol = solve_poisson(chain);
  if (cfg.n_grid.empty()) throw ConfigInvalid("martingale needs n_grid");
  std::vector<double> ts = cfg.t_grid;
  if (ts.empty()) ts = {0.25, 1.0, 2.0};
  CsvTable t;
  t.header = {"n", "t", "re_total", "im_total", "re_A", "re_B", "re_C",
              "ratio"};
  Json jrows = Json::array();
  for (long n : cfg.n_grid)
    for (double tv : ts) {
      const auto abc = abc_decomposition(chain, sol, tv, n);
      const double ratio = std::abs(abc.total) *
                           std::sqrt(static_cast<double>(n)) / std::abs(tv);
      t.rows.push_back({std::to_string(n), format_number(tv),
                        format_number(abc.total.real()),
                        format_number(abc.total.imag()),
                        format_number(abc.A.real()),
                        format_number(abc.B.real()),
                        format_number(abc.C.real()), format_number(ratio)});
      jrows.push_back({{"n", n},
                       {"t", tv},
                       {"re_total", abc.total.real()},
                       {"im_total", abc.total.imag()},
                       {"re_A", abc.A.real()},
                       {"re_B", abc.B.real()},
                       {"re_C", abc.C.real()},
                       {"ratio", ratio}});
    }
  Json j{{"schema_version", 1}, {"rows", jrows}};
  emit(cfg, "martingale", &t, &j);
  return 0;
}

inline int run_charfn(const ExperimentConfig& cfg) {
  const auto chain = resolve_chain(cfg.model);
  const auto sol = solve_poisson(chain);
  if (cfg.n_grid.empty()) throw ConfigInvalid("charfn needs n_grid");
  const auto rt = prop41_ratio(chain, sol, cfg.n_grid, cfg.t_per_n);
  const auto rs = cor41_ratio(chain, sol, cfg.n_grid, cfg.t_per_n);
  CsvTable t;
  t.header = {"n", "ratio_T", "arg_t_T", "ratio_S", "arg_t_S"};
  Json jrows = Json::array();
  for (size_t i = 0; i < rt.size(); ++i) {
    t.rows.push_back({std::to_string(rt[i].n), format_number(rt[i].ratio),
                      format_number(rt[i].arg_t), format_number(rs[i].ratio),
                      format_number(rs[i].arg_t)});
    jrows.push_back({{"n", rt[i].n},
                     {"ratio_T", rt[i].ratio},
                     {"arg_t_T", rt[i].arg_t},
                     {"ratio_S", rs[i].ratio},
                     {"arg_t_S", rs[i].arg_t}});
  }
  Json j{{"schema_version", 1}, {"rows", jrows}};
  emit(cfg, "charfn", &t, &j);
  return 0;
}

inline RateReport rate_exact(const ExperimentConfig& cfg,
                             const FiniteChain& chain) {
  const auto sol = solve_poisson(chain);
  if (sol.sigma2 <= 0.0) throw DegenerateVariance("sigma2 = 0");
  const double sigma = std::sqrt(sol.sigma2);
  RateReport report;
  report.method = "exact-dp";
  report.n_grid = cfg.n_grid;
  for (long n : cfg.n_grid)
    report.distances.push_back(kolmogorov_distance(
        exact_sn_distribution(chain, n, chain.stationary, cfg.budget_cells),
        sigma));
  report.fit = rate_slope_fit(report.n_grid, report.distances);
  return report;
}

inline RateReport rate_mc(const ExperimentConfig& cfg,
                          const AffineModel& model) {
  if (!cfg.has_seed)
    throw ConfigInvalid("Monte Carlo rate runs need master_seed");
  RateReport report;
  report.method = "mc-dkw";
  report.n_grid = cfg.n_grid;
  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    const long n = cfg.n_grid[i];
    const long m =
        cfg.samples_grid.empty() ? cfg.samples : cfg.samples_grid[i];
    std::vector<double> s_n(static_cast<size_t>(m));
    // distinct seed stream per grid point so runs never share paths
    const uint64_t seed =
        derive_path_seed(cfg.master_seed, 0x5A17ULL + static_cast<uint64_t>(i));
    parallel_for(m, cfg.workers, [&](long k) {
      s_n[static_cast<size_t>(k)] = simulate_affine_checkpoints(
          model, {n}, seed, static_cast<uint64_t>(k))[0];
    });
    double sigma2 = cfg.sigma2;
    if (sigma2 <= 0.0) sigma2 = mc_variance_estimate(s_n, n).sigma2_hat;
    if (sigma2 <= 0.0) throw DegenerateVariance("estimated sigma2 = 0");
    const double scale = std::sqrt(sigma2 * static_cast<double>(n));
    std::vector<double> scaled;
    scaled.reserve(s_n.size());
    for (double s : s_n) scaled.push_back(s / scale);
    const auto ek = empirical_kolmogorov(std::move(scaled), cfg.delta);
    report.distances.push_back(ek.distance);
    report.band_low.push_back(std::max(ek.distance - ek.dkw_epsilon, 0.0));
    report.band_high.push_back(ek.distance + ek.dkw_epsilon);
  }
  report.fit = rate_slope_fit(report.n_grid, report.distances);
  return report;
}

inline int run_rate(const ExperimentConfig& cfg) {
  if (cfg.n_grid.size() < 4)
    throw ConfigInvalid("rate needs an n_grid with at least 4 points");
  const RateReport report = model_is_affine(cfg.model)
                                ? rate_mc(cfg, resolve_affine(cfg.model))
                                : rate_exact(cfg, resolve_chain(cfg.model));
  const CsvTable csv = rate_report_csv(report);
  const Json j = rate_report_json(report);
  emit(cfg, "rate", &csv, &j);
  if (cfg.svg)
    write_atomic(std::filesystem::path(cfg.out_dir) / "rate.svg",
                 rate_report_svg(report));
  return 0;
}

inline int run_integral(const ExperimentConfig& cfg) {
  const auto chain = resolve_chain(cfg.model);
  const auto sol = solve_poisson(chain);
  if (sol.sigma2 <= 0.0) throw DegenerateVariance("sigma2 = 0");
  if (cfg.n_grid.empty()) throw ConfigInvalid("integral needs n_grid");
  const double sigma = std::sqrt(sol.sigma2);
  const double alpha =
      cfg.alpha > 0.0 ? cfg.alpha
                      : default_alpha(chain, sigma, 0.0, 64, cfg.gap_min);
  if (alpha <= 0.0) throw SpectralGapLost("no admissible alpha found");
  CsvTable t;
  t.header = {"n", "a_n", "i_n", "j_n", "k_n", "residual", "panels"};
  Json jrows = Json::array();
  for (long n : cfg.n_grid) {
    const auto be =
        berry_esseen_integral(chain, sol, alpha, n, chain.stationary);
    t.rows.push_back({std::to_string(n), format_number(be.a_n),
                      format_number(be.i_n), format_number(be.j_n),
                      format_number(be.k_n),
                      format_number(be.decomposition_residual),
                      std::to_string(be.panels)});
    jrows.push_back({{"n", n},
                     {"a_n", be.a_n},
                     {"i_n", be.i_n},
                     {"j_n", be.j_n},
                     {"k_n", be.k_n},
                     {"residual", be.decomposition_residual},
                     {"panels", be.panels}});
  }
  Json j{{"schema_version", 1}, {"alpha", alpha}, {"rows", jrows}};
  emit(cfg, "integral", &t, &j);
  return 0;
}

inline int run_doeblin(const ExperimentConfig& cfg) {
  const auto chain = resolve_chain(cfg.model);
  const auto cert = doeblin_ess_bound(chain, cfg.ell_max);
  Json j{{"schema_version", 1},
         {"ell", cert.ell},
         {"bound", cert.bound},
         {"worst_set_value", cert.worst_set_value}};
  emit(cfg, "doeblin", nullptr, &j);
  return 0;
}

inline int run_condition_star(const ExperimentConfig& cfg) {
  if (!cfg.has_seed)
    throw ConfigInvalid("condition-star needs master_seed");
  const auto model = resolve_affine(cfg.model);
  const auto est =
      condition_star_estimate(model, cfg.n0, cfg.samples, cfg.master_seed);
  Json j{{"schema_version", 1},
         {"n0", cfg.n0},
         {"samples", cfg.samples},
         {"i1_mean", est.i1.mean},
         {"i1_stderr", est.i1.stderr_},
         {"i2_mean", est.i2.mean},
         {"i2_stderr", est.i2.stderr_},
         {"pass", est.pass}};
  emit(cfg, "condition-star", nullptr, &j);
  return 0;
}

inline int run_models(const ExperimentConfig& cfg) {
  Json j{{"schema_version", 1},
         {"models",
          Json::array(
              {{{"name", "two_state"}, {"params", {"a", "b"}}},
               {{"name", "iid"}, {"params", {"p", "xi"}}},
               {{"name", "random_chain"}, {"params", {"n", "seed"}}},
               {{"name", "discretized_ar1"},
                {"params", {"a", "s", "grid_size", "x_max"}}},
               {{"name", "ar1_scalar"}, {"params", {"a", "s"}}},
               {{"name", "affine_vector"}, {"params", {"spec"}}}})}};
  emit(cfg, "models", nullptr, &j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace detail

inline void write_error_record(const ExperimentConfig& cfg,
                               const std::string& name,
                               const std::string& message) {
  Json j{{"schema_version", 1}, {"error", name}, {"message", message}};
  std::cerr << j.dump() << "\n";
  try {
    write_atomic(std::filesystem::path(cfg.out_dir) / "error.json",
                 j.dump(2) + "\n");
  } catch (const Error&) {
    // stderr record already emitted; out dir may be unwritable
  }
}

inline int run(const std::string& command, const ExperimentConfig& cfg) {
  try {
    if (command == "spectral") return detail::run_spectral(cfg);
    if (command == "poisson") return detail::run_poisson(cfg);
    if (command == "martingale") return detail::run_martingale(cfg);
    if (command == "charfn") return detail::run_charfn(cfg);
    if (command == "rate") return detail::run_rate(cfg);
    if (command == "integral") return detail::run_integral(cfg);
    if (command == "doeblin") return detail::run_doeblin(cfg);
    if (command == "condition-star") return detail::run_condition_star(cfg);
    if (command == "models") return detail::run_models(cfg);
    throw ConfigInvalid("unknown command: " + command);
  } catch (const ConfigInvalid& e) {
    write_error_record(cfg, e.name(), e.what());
    return 1;
  } catch (const Error& e) {
    write_error_record(cfg, e.name(), e.what());
    return 2;
  } catch (const Json::exception& e) {
    write_error_record(cfg, "ConfigInvalid", e.what());
    return 1;
  } catch (const std::exception& e) {
    write_error_record(cfg, "Unhandled", e.what());
    return 2;
  }
}

}  // namespace cltlab::cli
