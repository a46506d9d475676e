#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "speedscale/config.hpp"
#include "speedscale/coupling.hpp"
#include "speedscale/experiments.hpp"

using namespace speedscale;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "speedscale-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("coupled level construction") {
    SECTION("a single level reduces to the plain mixture") {
        const CoupledArrivalLevels one({1.0});
        REQUIRE(one.levels() == 1);
        CHECK(one.recursion_parameters()[0] == Catch::Approx(0.5).margin(1e-12));
        CHECK(one.spec(0).rho_z() == Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("two levels follow the recursion algebra") {
        const CoupledArrivalLevels two({1.0, 32.0});
        const double r1 = 9.0 / 328.0;
        CHECK(two.recursion_parameters()[0] == Catch::Approx(r1).margin(1e-12));
        CHECK(two.recursion_parameters()[1] ==
              Catch::Approx((0.5 - r1) / (1.0 - r1)).margin(1e-12));
    }
    SECTION("configuration errors") {
        CHECK_THROWS_AS(CoupledArrivalLevels({}), std::invalid_argument);
        CHECK_THROWS_AS(CoupledArrivalLevels({2.0, 1.0}), std::invalid_argument);
        CHECK_THROWS_AS(CoupledArrivalLevels({0.5, 1.0}), std::invalid_argument);
    }
}

TEST_CASE("coupled draws are monotone and hit their marginals") {
    const std::vector<double> kappas = {1, 2, 4, 8, 12, 16, 24, 32};
    const CoupledArrivalLevels levels(kappas);
    const std::size_t L = levels.levels();

    RngStream stream(31337, 0, "coupling");
    const long n = 200000;
    std::vector<double> s1(L, 0.0), s2(L, 0.0), s4(L, 0.0);
    std::vector<long> z_count(L, 0);
    for (long t = 0; t < n; ++t) {
        const auto d = levels.draw(stream);
        for (std::size_t i = 1; i < L; ++i) REQUIRE(d.z[i] >= d.z[i - 1]);
        for (std::size_t l = 0; l < L; ++l) {
            const double a = d.a[l];
            s1[l] += a;
            s2[l] += a * a;
            s4[l] += a * a * a * a;
            z_count[l] += d.z[L - 1 - l];
        }
    }
    for (std::size_t l = 0; l < L; ++l) {
        const double mean = s1[l] / n;
        const double var = s2[l] / n - mean * mean;
        const double m4 = s4[l] / n;  // crude bound for the variance of the variance
        const double se_mean = std::sqrt(var / n);
        const double se_var = std::sqrt(std::max(0.0, m4 - var * var) / n);
        CHECK(std::abs(mean - 1.0) < 3.0 * se_mean + 1e-3);
        CHECK(std::abs(var - kappas[l]) < 3.0 * se_var + 0.02 * kappas[l]);
        // marginal of the coupled Bernoulli equals rho_Z for its level
        const double rho_hat = static_cast<double>(z_count[l]) / n;
        const double rho = levels.spec(l).rho_z();
        CHECK(std::abs(rho_hat - rho) < 3.0 * std::sqrt(rho * (1 - rho) / n) + 1e-4);
    }
}

TEST_CASE("config parsing") {
    Config cfg;
    SECTION("json object") {
        const fs::path dir = fresh_dir("config-json");
        {
            std::ofstream f(dir / "c.json");
            f << "{\"alpha\": 1.5, \"stages\": 6, \"kappas\": [1, 2], \"svg\": true}\n";
        }
        cfg.load_file((dir / "c.json").string());
        CHECK(cfg.alpha == 1.5);
        CHECK(cfg.stages == 6);
        CHECK(cfg.kappas == std::vector<double>{1.0, 2.0});
        CHECK(cfg.svg);
    }
    SECTION("key=value text") {
        const fs::path dir = fresh_dir("config-kv");
        {
            std::ofstream f(dir / "c.cfg");
            f << "# comment\nalpha = 2.0\nsteps_per_stage=1234\nkappas = 1, 4, 32\nfull=true\n";
        }
        cfg.load_file((dir / "c.cfg").string());
        CHECK(cfg.alpha == 2.0);
        CHECK(cfg.steps_per_stage == 1234);
        CHECK(cfg.kappas == std::vector<double>{1.0, 4.0, 32.0});
        CHECK(cfg.full);
    }
    SECTION("unknown keys are rejected") {
        const fs::path dir = fresh_dir("config-bad");
        {
            std::ofstream f(dir / "c.cfg");
            f << "nope = 1\n";
        }
        CHECK_THROWS_AS(cfg.load_file((dir / "c.cfg").string()), std::invalid_argument);
    }
}

TEST_CASE("unknown experiment is a usage error") {
    CHECK_THROWS_AS(run_experiment("frobnicate", Config{}, 1, fresh_dir("unknown")),
                    std::invalid_argument);
}

TEST_CASE("fluid-eval writes a manifest before results and is deterministic") {
    Config cfg;
    cfg.x_max = 10.0;
    const fs::path d1 = fresh_dir("fluid-eval-1");
    const fs::path d2 = fresh_dir("fluid-eval-2");
    run_experiment("fluid-eval", cfg, 99, d1);
    run_experiment("fluid-eval", cfg, 99, d2);
    CHECK(fs::exists(d1 / "manifest.json"));
    CHECK(slurp(d1 / "fluid_table.csv") == slurp(d2 / "fluid_table.csv"));
    const std::string csv = slurp(d1 / "fluid_table.csv");
    CHECK(csv.rfind("x,kstar,", 0) == 0);  // header row first
}

TEST_CASE("variance study output is byte-identical across thread counts") {
    Config cfg;
    cfg.replications = 6;
    cfg.stages = 2;
    cfg.steps_per_stage = 1500;
    cfg.kappas = {1.0, 8.0, 32.0};

    const fs::path d1 = fresh_dir("vs-threads-1");
    const fs::path d8 = fresh_dir("vs-threads-8");
    cfg.threads = 1;
    run_experiment("variance-study", cfg, 4242, d1);
    cfg.threads = 8;
    run_experiment("variance-study", cfg, 4242, d8);

    for (const char* name : {"theta_samples.csv", "variance.csv", "normalized_error.csv"}) {
        INFO(name);
        CHECK(slurp(d1 / name) == slurp(d8 / name));
    }
}
