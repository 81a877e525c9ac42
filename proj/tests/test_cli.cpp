#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "trilogit/debias.hpp"
#include "trilogit/glm.hpp"
#include "trilogit/montecarlo.hpp"
#include "trilogit/serialize.hpp"

using namespace trilogit;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("trilogit_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CmdResult run_cli(const std::string& args) {
  const fs::path out = scratch_dir() / "stdout.txt";
  const fs::path err = scratch_dir() / "stderr.txt";
  const std::string cmd = std::string(TRILOGIT_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int rc = std::system(cmd.c_str());
  CmdResult r;
  r.code = WEXITSTATUS(rc);
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Key-value lookup in serialized output; returns the first value token.
double kv_value(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(key + " ", 0) == 0)
      return std::stod(line.substr(key.size() + 1));
  }
  FAIL("key not found: " + key);
  return 0.0;
}

fs::path write_generated_csv(int N, int T, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.N = N;
  cfg.T = T;
  cfg.seed = seed;
  Panel p = generate(cfg, 0);
  const fs::path path = scratch_dir() / ("panel_" + std::to_string(seed) + ".csv");
  std::ofstream os(path);
  write_panel_rows_csv(os, p);
  return path;
}

}  // namespace

TEST_CASE("estimate matches a direct library call") {
  const fs::path csv = write_generated_csv(20, 5, 7);
  const fs::path out = scratch_dir() / "est.kv";
  auto r = run_cli("estimate --input " + csv.string() +
                   " --i i --j j --t t --y y --x x --format kv --output " +
                   out.string());
  REQUIRE(r.code == 0);
  const std::string kv = slurp(out);

  DgpConfig cfg;
  cfg.N = 20;
  cfg.T = 5;
  cfg.seed = 7;
  Panel panel = drop_uninformative(generate(cfg, 0)).first;
  FitResult fit = fit_mle(panel);
  CorrectedFit cf = correct_fit(panel, fit);
  REQUIRE(kv_value(kv, "beta_uncorrected") ==
          Catch::Approx(cf.beta_uncorrected(0)).margin(1e-12));
  REQUIRE(kv_value(kv, "beta_debiased") ==
          Catch::Approx(cf.beta_debiased(0)).margin(1e-12));
  REQUIRE(kv_value(kv, "se") == Catch::Approx(cf.se(0)).margin(1e-12));
  REQUIRE(kv_value(kv, "n") == Catch::Approx(static_cast<double>(panel.n())));
}

TEST_CASE("estimate text output is table shaped") {
  const fs::path csv = write_generated_csv(15, 4, 11);
  auto r = run_cli("estimate --input " + csv.string() + " --i i --j j --t t --y y --x x");
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("A: Model parameters") != std::string::npos);
  REQUIRE(r.out.find("B: Odds ratios") != std::string::npos);
  REQUIRE(r.out.find("after pruning") != std::string::npos);
}

TEST_CASE("non-binary outcomes exit with the data code and row context") {
  const fs::path csv = scratch_dir() / "bad.csv";
  {
    std::ofstream os(csv);
    os << "i,j,t,y,x\na,b,1,0,0.5\na,c,1,2,0.5\n";
  }
  auto r = run_cli("estimate --input " + csv.string() + " --i i --j j --t t --y y --x x");
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("row 3") != std::string::npos);
}

TEST_CASE("missing column is a data error") {
  const fs::path csv = write_generated_csv(10, 4, 13);
  auto r = run_cli("estimate --input " + csv.string() +
                   " --i i --j j --t t --y y --x nosuch");
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("nosuch") != std::string::npos);
}

TEST_CASE("collinear regressors exit with the estimation code") {
  DgpConfig cfg;
  cfg.N = 10;
  cfg.T = 4;
  cfg.seed = 17;
  Panel p = generate(cfg, 0);
  const fs::path csv = scratch_dir() / "collinear.csv";
  {
    std::ofstream os(csv);
    os << "i,j,t,y,x\n";
    for (std::int64_t o = 0; o < p.n(); ++o) {
      const auto so = static_cast<std::size_t>(o);
      os << p.i_labels()[static_cast<std::size_t>(p.i_of()[so])] << ','
         << p.j_labels()[static_cast<std::size_t>(p.j_of()[so])] << ','
         << p.t_labels()[static_cast<std::size_t>(p.t_of()[so])] << ','
         << static_cast<int>(p.y()[so]) << ",0\n";  // identically zero regressor
    }
  }
  auto r = run_cli("estimate --input " + csv.string() + " --i i --j j --t t --y y --x x");
  REQUIRE(r.code == 3);
  REQUIRE(r.err.find("collinear") != std::string::npos);
}

TEST_CASE("no-bias-correction omits the debiased fields") {
  const fs::path csv = write_generated_csv(15, 4, 19);
  const fs::path out = scratch_dir() / "nobc.kv";
  auto r = run_cli("estimate --input " + csv.string() +
                   " --i i --j j --t t --y y --x x --no-bias-correction"
                   " --format kv --output " + out.string());
  REQUIRE(r.code == 0);
  const std::string kv = slurp(out);
  REQUIRE(kv.find("beta_debiased") == std::string::npos);
  REQUIRE(kv.find("bias_alpha") == std::string::npos);
  REQUIRE(kv.find("beta_uncorrected ") != std::string::npos);
  REQUIRE(kv.find("se ") != std::string::npos);
}

TEST_CASE("simulate requires a seed") {
  auto r = run_cli("simulate --grid 10x4 --reps 2");
  REQUIRE(r.code == 1);
  REQUIRE(r.err.find("seed") != std::string::npos);
}

TEST_CASE("simulate writes one row per estimator per cell, byte-identically") {
  const fs::path out1 = scratch_dir() / "study1.csv";
  const fs::path out2 = scratch_dir() / "study2.csv";
  const std::string flags = "simulate --grid 10x4,12x4 --reps 4 --seed 1 --output ";
  REQUIRE(run_cli(flags + out1.string()).code == 0);
  REQUIRE(run_cli(flags + out2.string()).code == 0);
  const std::string csv = slurp(out1);
  REQUIRE(csv == slurp(out2));
  int lines = 0;
  for (char c : csv) lines += (c == '\n');
  REQUIRE(lines == 1 + 2 * 2);
  REQUIRE(csv.find("10,4,uncorrected") != std::string::npos);
  REQUIRE(csv.find("10,4,debiased") != std::string::npos);
}

TEST_CASE("figure2 mode emits normalized-difference records") {
  const fs::path out = scratch_dir() / "nd.csv";
  auto r = run_cli("simulate --figure2 --sizes 10x4,12x4 --reps 3 --seed 2 --output " +
                   out.string());
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out);
  REQUIRE(csv.rfind("N,T,rep,estimator,scaled_a,scaled_b", 0) == 0);
  REQUIRE(csv.find("\n10,4,0,uncorrected,") != std::string::npos);
  REQUIRE(csv.find("\n12,4,") != std::string::npos);
}

TEST_CASE("verify passes at the default sizes") {
  auto r = run_cli("verify");
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("[PASS] dense-vs-fast equivalence") != std::string::npos);
  REQUIRE(r.out.find("[FAIL]") == std::string::npos);
}

TEST_CASE("a corrupted projection tolerance is caught by the equivalence check") {
  auto r = run_cli("verify --inner-tol 1e-1");
  REQUIRE(r.code == 4);
  REQUIRE(r.err.find("dense-vs-fast") != std::string::npos);
}

TEST_CASE("asymmetric lemma sizes are a usage error") {
  auto r = run_cli("verify --sizes 6x4");
  REQUIRE(r.code == 1);
  REQUIRE(r.err.find("N = T") != std::string::npos);
}

TEST_CASE("unknown flags are usage errors") {
  REQUIRE(run_cli("estimate --bogus").code == 1);
  REQUIRE(run_cli("nonsense").code == 1);
}
