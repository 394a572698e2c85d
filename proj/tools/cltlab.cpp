#include <CLI11.hpp>
#include <fstream>

#include "cltlab/cli.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  uint64_t seed = 0;
  bool has_seed = false;
  std::string out_dir;
  std::string format;
  bool svg = false;
  int workers = 0;
};

void attach(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seed, "master seed override")
      ->each([&opts](const std::string&) { opts.has_seed = true; });
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--format", opts.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_flag("--svg", opts.svg, "also emit an SVG plot where supported");
  cmd->add_option("--workers", opts.workers, "worker thread cap")
      ->check(CLI::PositiveNumber);
}

int dispatch(const std::string& command, const CommonOptions& opts) {
  cltlab::cli::ExperimentConfig cfg;
  const auto apply_out_dir = [&](cltlab::cli::ExperimentConfig& c) {
    if (!opts.out_dir.empty()) c.out_dir = opts.out_dir;
    if (const char* env = std::getenv("CLTLAB_OUT"); env && *env)
      c.out_dir = env;
  };
  try {
    cltlab::Json j = cltlab::Json::object();
    if (!opts.config_path.empty()) {
      std::ifstream in(opts.config_path);
      if (!in) throw cltlab::IoFailure("cannot open " + opts.config_path);
      in >> j;
    }
    cfg = cltlab::cli::parse_config(j);
  } catch (const cltlab::Error& e) {
    apply_out_dir(cfg);
    cltlab::cli::write_error_record(cfg, e.name(), e.what());
    return 1;
  } catch (const std::exception& e) {
    apply_out_dir(cfg);
    cltlab::cli::write_error_record(cfg, "ConfigInvalid", e.what());
    return 1;
  }
  // flags override config scalars; CLTLAB_OUT overrides --out
  if (opts.has_seed) {
    cfg.master_seed = opts.seed;
    cfg.has_seed = true;
  }
  apply_out_dir(cfg);
  if (!opts.format.empty()) cfg.format = opts.format;
  if (opts.svg) cfg.svg = true;
  if (opts.workers > 0) cfg.workers = opts.workers;
  return cltlab::cli::run(command, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for Markov-chain CLT convergence rates"};
  app.require_subcommand(1);

  const std::vector<std::string> commands{
      "spectral", "poisson",  "martingale",     "charfn", "rate",
      "integral", "doeblin",  "condition-star", "models"};
  std::map<std::string, CommonOptions> opts;
  for (const auto& name : commands)
    attach(app.add_subcommand(name), opts[name]);

  CLI11_PARSE(app, argc, argv);
  for (const auto& name : commands)
    if (app.got_subcommand(name)) return dispatch(name, opts.at(name));
  return 1;
}
