#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "powvar/io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const fs::path out_file = fs::temp_directory_path() / "powvar_cli_out.txt";
    const std::string cmd =
        std::string(CLI_BINARY) + " " + args + " > " + out_file.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream in(out_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("powvar_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("kernels-table prints the mu bias factor") {
    auto r = run_cli("kernels-table --op mu --a 1 --b 0 --gamma 1");
    CHECK(r.exit_code == 0);
    CHECK(std::stod(r.out) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    r = run_cli("kernels-table --op mu --a 1 --b 1 --gamma 1");
    CHECK(std::stod(r.out) == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
    r = run_cli("kernels-table --op gamma-half --x 1e13");
    CHECK(std::stod(r.out) == doctest::Approx(1.7724538509055159).epsilon(1e-6));
}

TEST_CASE("simulate is byte-deterministic") {
    const auto d1 = fresh_dir("sim1");
    const auto d2 = fresh_dir("sim2");
    const std::string flags =
        "simulate --domain bounded --N 8 --M 1 --t 0.2 --modes 16 --seed 1 --output-dir ";
    CHECK(run_cli(flags + d1.string()).exit_code == 0);
    CHECK(run_cli(flags + d2.string()).exit_code == 0);
    CHECK(powvar::read_file(d1 / "sample.csv") == powvar::read_file(d2 / "sample.csv"));
    CHECK(powvar::read_file(d1 / "sample.json") == powvar::read_file(d2 / "sample.json"));
    CHECK(fs::exists(d1 / "config_echo.json"));
}

TEST_CASE("simulate -> estimate pipeline") {
    const auto d = fresh_dir("pipe");
    CHECK(run_cli("simulate --domain line --field ux --N 64 --M 2 --T 0.4 --seed 9 "
                  "--theta 0.1 --sigma 0.1 --output-dir " +
                  d.string())
              .exit_code == 0);
    const auto r = run_cli("estimate --input " + (d / "sample.json").string() +
                           " --estimator sigma2_ux --theta 0.1 --output-dir " + d.string());
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(d / "estimate.json"));
    CHECK(fs::exists(d / "estimate.csv"));
    const double value = std::stod(r.out);
    CHECK(value > 0.0);
    CHECK(value < 1.0);
    // CSV input gives the same estimate
    const auto r2 = run_cli("estimate --input " + (d / "sample.csv").string() +
                            " --estimator sigma2_ux --theta 0.1 --output-dir " + d.string());
    CHECK(std::stod(r2.out) == value);
}

TEST_CASE("mc-normality echo round-trips byte-identically") {
    const auto d1 = fresh_dir("mc1");
    const auto d2 = fresh_dir("mc2");
    CHECK(run_cli("mc-normality --simulator cov_line --estimator sigma2_ux --N 24 --M 2 "
                  "--T 0.4 --reps 12 --seed 5 --threads 2 --output-dir " +
                  d1.string())
              .exit_code == 0);
    CHECK(run_cli("mc-normality --config " + (d1 / "config_echo.json").string() +
                  " --output-dir " + d2.string())
              .exit_code == 0);
    for (const char* f : {"normality.csv", "histogram.csv", "qq.csv", "summary.json",
                          "config_echo.json"})
        CHECK(powvar::read_file(d1 / f) == powvar::read_file(d2 / f));
}

TEST_CASE("mc-consistency writes the sweep table") {
    const auto d = fresh_dir("con");
    CHECK(run_cli("mc-consistency --simulator cov_line --estimator sigma2_ux "
                  "--n-list 16,32 --M 1 --t 0.2 --reps 6 --seed 3 --output-dir " +
                  d.string())
              .exit_code == 0);
    const std::string csv = powvar::read_file(d / "consistency.csv");
    CHECK(csv.rfind("N,mean,stderr,failures\n", 0) == 0);
    CHECK(csv.find("\n16,") != std::string::npos);
    CHECK(csv.find("\n32,") != std::string::npos);
}

TEST_CASE("exit codes distinguish usage, domain, and data errors") {
    CHECK(run_cli("no-such-subcommand").exit_code == 1);
    CHECK(run_cli("simulate --no-such-flag 3").exit_code == 1);
    // theta <= 0 is a domain error
    CHECK(run_cli("simulate --domain bounded --N 8 --M 1 --t 0.2 --theta -1 "
                  "--output-dir " +
                  fresh_dir("err1").string())
              .exit_code == 2);
    // M*N over the dense cap is a size (domain) error
    CHECK(run_cli("simulate --domain line --field ux --N 3000 --M 2 --T 1 --output-dir " +
                  fresh_dir("err2").string())
              .exit_code == 2);
    // degenerate sample: theta estimator on a sigma = 0 field
    const auto d = fresh_dir("err3");
    CHECK(run_cli("simulate --domain line --field ux --N 16 --M 1 --t 0.2 --sigma 0 "
                  "--output-dir " +
                  d.string())
              .exit_code == 0);
    CHECK(run_cli("estimate --input " + (d / "sample.json").string() +
                  " --estimator theta2_ux --sigma 0.1 --output-dir " + d.string())
              .exit_code == 3);
}

TEST_CASE("verify subcommand emits a JSON report") {
    const auto d = fresh_dir("ver");
    const auto r = run_cli("verify --trials 3 --seed 12 --output-dir " + d.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("PASS gamma_half_integral") != std::string::npos);
    CHECK(fs::exists(d / "verify.json"));
}
