#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cltlab/cli.hpp"

using namespace cltlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cltlab_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static inline int counter = 0;
};

Json two_state_config() {
  return Json{{"model", {{"builtin", "two_state"}, {"a", 0.3}, {"b", 0.4}}},
              {"n_grid", {64, 128, 256, 512}}};
}

Json mc_config() {
  return Json{
      {"model", {{"builtin", "ar1_scalar"}, {"a", 0.5}, {"s", 1.0}}},
      {"n_grid", {100, 200, 400, 800}},
      {"samples", 500},
      {"sigma2", 4.0},
      {"master_seed", 12345}};
}

}  // namespace

TEST_CASE("parse_config") {
  SUBCASE("defaults") {
    const auto cfg = cli::parse_config(Json::object());
    CHECK(cfg.format == "csv");
    CHECK(cfg.workers == 1);
    CHECK_FALSE(cfg.has_seed);
    CHECK(cfg.delta == 0.05);
  }
  SUBCASE("n_grid must increase strictly") {
    CHECK_THROWS_AS(cli::parse_config(Json{{"n_grid", {10, 10}}}),
                    ConfigInvalid);
    CHECK_THROWS_AS(cli::parse_config(Json{{"n_grid", {100, 50}}}),
                    ConfigInvalid);
  }
  SUBCASE("tolerances must be positive") {
    CHECK_THROWS_AS(cli::parse_config(Json{{"delta", 0.0}}), ConfigInvalid);
    CHECK_THROWS_AS(cli::parse_config(Json{{"t_max", -1.0}}), ConfigInvalid);
    CHECK_THROWS_AS(cli::parse_config(Json{{"gap_min", 0.0}}), ConfigInvalid);
  }
  SUBCASE("format whitelist") {
    CHECK_THROWS_AS(
        cli::parse_config(Json{{"output", {{"format", "xml"}}}}),
        ConfigInvalid);
  }
  SUBCASE("samples_grid must match n_grid") {
    CHECK_THROWS_AS(
        cli::parse_config(
            Json{{"n_grid", {10, 20}}, {"samples_grid", {100}}}),
        ConfigInvalid);
  }
  SUBCASE("seed is recorded") {
    const auto cfg = cli::parse_config(Json{{"master_seed", 99}});
    CHECK(cfg.has_seed);
    CHECK(cfg.master_seed == 99);
  }
}

TEST_CASE("model resolution") {
  CHECK_NOTHROW(cli::resolve_chain(
      Json{{"builtin", "two_state"}, {"a", 0.3}, {"b", 0.4}}));
  CHECK_NOTHROW(cli::resolve_chain(
      Json{{"builtin", "random_chain"}, {"n", 4}, {"seed", 1}}));
  CHECK_NOTHROW(cli::resolve_chain(Json{{"builtin", "discretized_ar1"},
                                        {"a", 0.5},
                                        {"s", 1.0},
                                        {"grid_size", 11},
                                        {"x_max", 4.0}}));
  CHECK_NOTHROW(cli::resolve_affine(
      Json{{"builtin", "ar1_scalar"}, {"a", 0.5}, {"s", 1.0}}));
  CHECK_THROWS_AS(cli::resolve_chain(
                      Json{{"builtin", "ar1_scalar"}, {"a", 0.5}, {"s", 1.0}}),
                  ConfigInvalid);
  CHECK_THROWS_AS(cli::resolve_affine(
                      Json{{"builtin", "two_state"}, {"a", 0.3}, {"b", 0.4}}),
                  ConfigInvalid);
  CHECK_THROWS_AS(cli::resolve_chain(Json()), ConfigInvalid);
  CHECK(cli::model_is_affine(Json{{"builtin", "ar1_scalar"}}));
  CHECK_FALSE(cli::model_is_affine(Json{{"builtin", "two_state"}}));
}

TEST_CASE("run: exact rate produces the pinned CSV layout, deterministically") {
  TempDir dir;
  auto cfg = cli::parse_config(two_state_config());
  cfg.out_dir = dir.path.string();
  REQUIRE(cli::run("rate", cfg) == 0);
  const std::string first = slurp(dir.path / "rate.csv");
  CHECK(first.rfind("n,distance,method,band_low,band_high\n", 0) == 0);
  CHECK(first.find("exact-dp") != std::string::npos);
  REQUIRE(cli::run("rate", cfg) == 0);
  CHECK(slurp(dir.path / "rate.csv") == first);

  SUBCASE("json format and svg") {
    cfg.format = "json";
    cfg.svg = true;
    REQUIRE(cli::run("rate", cfg) == 0);
    const Json j = Json::parse(slurp(dir.path / "rate.json"));
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("method") == "exact-dp");
    CHECK(j.at("slope").get<double>() < -0.3);
    // round trip: parse -> serialize -> parse identical
    CHECK(Json::parse(j.dump()) == j);
    CHECK(slurp(dir.path / "rate.svg").rfind("<svg", 0) == 0);
  }
}

TEST_CASE("run: Monte Carlo rate is byte-identical across worker counts") {
  TempDir dir;
  auto cfg = cli::parse_config(mc_config());
  cfg.out_dir = dir.path.string();
  cfg.workers = 1;
  REQUIRE(cli::run("rate", cfg) == 0);
  const std::string serial = slurp(dir.path / "rate.csv");
  CHECK(serial.find("mc-dkw") != std::string::npos);
  cfg.workers = 4;
  REQUIRE(cli::run("rate", cfg) == 0);
  CHECK(slurp(dir.path / "rate.csv") == serial);
}

TEST_CASE("run: report commands") {
  TempDir dir;
  auto cfg = cli::parse_config(two_state_config());
  cfg.out_dir = dir.path.string();
  cfg.scan_points = 6;
  cfg.t_max = 0.5;
  cfg.n_grid = {16, 64, 256, 1024};

  SUBCASE("spectral CSV columns") {
    REQUIRE(cli::run("spectral", cfg) == 0);
    const std::string csv = slurp(dir.path / "spectral.csv");
    CHECK(csv.rfind("t,re_lambda,im_lambda,abs_lambda,gap,residual_D,"
                    "b1_value,b2_value,b3_value\n",
                    0) == 0);
  }
  SUBCASE("poisson JSON fields") {
    REQUIRE(cli::run("poisson", cfg) == 0);
    const Json j = Json::parse(slurp(dir.path / "poisson.json"));
    CHECK(j.contains("sigma2"));
    CHECK(j.contains("psi_l_inf"));
    CHECK(j.contains("h2_terms"));
    CHECK(j.contains("h2_total"));
    CHECK(j.at("sigma2").get<double>() > 0.0);
  }
  SUBCASE("martingale CSV columns") {
    cfg.n_grid = {16, 64};
    REQUIRE(cli::run("martingale", cfg) == 0);
    const std::string csv = slurp(dir.path / "martingale.csv");
    CHECK(csv.rfind("n,t,re_total,im_total,re_A,re_B,re_C,ratio\n", 0) == 0);
  }
  SUBCASE("charfn table") {
    cfg.n_grid = {16, 64};
    cfg.t_per_n = 8;
    REQUIRE(cli::run("charfn", cfg) == 0);
    const std::string csv = slurp(dir.path / "charfn.csv");
    CHECK(csv.rfind("n,ratio_T,arg_t_T,ratio_S,arg_t_S\n", 0) == 0);
  }
  SUBCASE("integral table") {
    cfg.n_grid = {16, 32};
    REQUIRE(cli::run("integral", cfg) == 0);
    const std::string csv = slurp(dir.path / "integral.csv");
    CHECK(csv.rfind("n,a_n,i_n,j_n,k_n,residual,panels\n", 0) == 0);
  }
  SUBCASE("doeblin JSON") {
    REQUIRE(cli::run("doeblin", cfg) == 0);
    const Json j = Json::parse(slurp(dir.path / "doeblin.json"));
    CHECK(j.at("ell").get<long>() >= 1);
    CHECK(j.at("worst_set_value").get<double>() <= 0.75 + 1e-12);
  }
  SUBCASE("condition-star JSON") {
    auto mc = cli::parse_config(mc_config());
    mc.out_dir = dir.path.string();
    REQUIRE(cli::run("condition-star", mc) == 0);
    const Json j = Json::parse(slurp(dir.path / "condition-star.json"));
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("i2_mean").get<double>() > 0.0);
  }
  SUBCASE("models listing") {
    REQUIRE(cli::run("models", cfg) == 0);
    const Json j = Json::parse(slurp(dir.path / "models.json"));
    CHECK(j.at("models").size() == 6);
  }
}

TEST_CASE("run: exit codes and error records") {
  TempDir dir;
  SUBCASE("validation errors give exit 1") {
    auto cfg = cli::parse_config(two_state_config());
    cfg.out_dir = dir.path.string();
    cfg.n_grid.clear();
    CHECK(cli::run("rate", cfg) == 1);
    const Json err = Json::parse(slurp(dir.path / "error.json"));
    CHECK(err.at("error") == "ConfigInvalid");
    CHECK_FALSE(err.at("message").get<std::string>().empty());
  }
  SUBCASE("unknown command gives exit 1") {
    auto cfg = cli::parse_config(Json::object());
    cfg.out_dir = dir.path.string();
    CHECK(cli::run("frobnicate", cfg) == 1);
  }
  SUBCASE("numerical failures give exit 2 with the error name") {
    auto cfg = cli::parse_config(Json{
        {"model",
         {{"kernel", {{0.7, 0.3}, {0.4, 0.6}}}, {"observable", {0.0, 0.0}}}},
        {"n_grid", {16, 32, 64, 128}}});
    cfg.out_dir = dir.path.string();
    CHECK(cli::run("rate", cfg) == 2);
    const Json err = Json::parse(slurp(dir.path / "error.json"));
    CHECK(err.at("error") == "DegenerateVariance");
  }
  SUBCASE("missing seed for Monte Carlo gives exit 1") {
    auto cfg = cli::parse_config(mc_config());
    cfg.out_dir = dir.path.string();
    cfg.has_seed = false;
    CHECK(cli::run("rate", cfg) == 1);
    CHECK(cli::run("condition-star", cfg) == 1);
  }
}

#ifdef CLTLAB_BIN
TEST_CASE("binary: flags, env override, exit codes") {
  TempDir dir;
  const fs::path config = dir.path / "config.json";
  {
    std::ofstream out(config);
    out << two_state_config().dump();
  }
  const std::string base = std::string(CLTLAB_BIN);
  SUBCASE("rate with --out") {
    const std::string cmd =
        base + " rate --config " + config.string() + " --out " +
        dir.path.string() + " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(dir.path / "rate.csv"));
  }
  SUBCASE("CLTLAB_OUT overrides --out") {
    const fs::path env_dir = dir.path / "env_out";
    const std::string cmd = "CLTLAB_OUT=" + env_dir.string() + " " + base +
                            " rate --config " + config.string() +
                            " --out " + dir.path.string() +
                            " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(env_dir / "rate.csv"));
  }
  SUBCASE("missing config file exits 1") {
    const std::string cmd = base + " rate --config " +
                            (dir.path / "nope.json").string() + " --out " +
                            dir.path.string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 1);
  }
  SUBCASE("models needs no config") {
    const std::string cmd = base + " models --out " + dir.path.string() +
                            " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(dir.path / "models.json"));
  }
}
#endif
