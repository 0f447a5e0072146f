#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "quantot/bench.hpp"
#include "quantot/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace quantot;
using namespace quantot::bench;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(Experiment kind, std::string dataset = "gaussian:d=2,tau=1e-2") {
    ExperimentConfig c;
    c.kind = kind;
    c.dataset = std::move(dataset);
    c.k_grid = {4, 8, 16};
    c.reps = 3;
    c.seed = 42;
    return c;
}

fs::path scratch_dir() {
    const auto p = fs::temp_directory_path() / ("quantot_bench_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QOT_BENCH_EXE) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream o;
    o << in.rdbuf();
    return o.str();
}

} // namespace

TEST_CASE("experiment names round-trip") {
    for (auto e : {Experiment::error_vs_k, Experiment::cpu_time, Experiment::eps_sweep, Experiment::qerr,
                   Experiment::variance, Experiment::lloyd})
        CHECK(parse_experiment(experiment_name(e)) == e);
    CHECK_THROWS_AS(parse_experiment("nope"), ConfigError);
}

TEST_CASE("default k grid is 9 log-spaced values from 8 to 128") {
    const auto g = default_k_grid();
    REQUIRE(g.size() == 9);
    CHECK(g.front() == 8);
    CHECK(g.back() == 128);
    for (std::size_t i = 1; i < g.size(); ++i) {
        CHECK(g[i] > g[i - 1]);
        CHECK(double(g[i]) / double(g[i - 1]) == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));
    }
}

TEST_CASE("config validation") {
    auto c = small(Experiment::error_vs_k);
    CHECK_NOTHROW(validate(c));
    c.k_grid = {8, 8};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.k_grid = {16, 8};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small(Experiment::error_vs_k);
    c.reps = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small(Experiment::variance);
    c.reps = 1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.reps = 2;
    CHECK_NOTHROW(validate(c));
    c = small(Experiment::eps_sweep);
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.eps_grid = {0.1, 0.05};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small(Experiment::error_vs_k);
    c.kappas = {1.5};
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("config hash tracks the error-relevant fields") {
    auto a = small(Experiment::error_vs_k), b = a;
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 43;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.dataset = "gaussian:d=3,tau=1e-2";
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.jobs = 8;
    CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("dataset specs") {
    CHECK(load_dataset("gaussian:d=3,tau=0.5", 0).samplers.reference.value() == doctest::Approx(std::sqrt(3.0)));
    CHECK(load_dataset("hypercube:d=4", 0).samplers.reference.value() == doctest::Approx(std::sqrt(8.0)));
    const auto g = load_dataset("gaussian:d=2,tau=1e-6,n=100", 1);
    CHECK(g.discrete());
    CHECK(g.mu_cloud->size() == 100);
    const auto m = load_dataset("mixtures:m=3,d=2,tau=1e-4,n=50", 1);
    CHECK(m.discrete());
    CHECK(load_dataset("mixtures:m=3,d=2,tau=1e-4,n=50", 1).mu_cloud->support() == m.mu_cloud->support());
    CHECK(load_dataset("grid:side=5", 0).mu_cloud->size() == 25);
    CHECK_THROWS_AS(load_dataset("bogus:d=1", 0), ConfigError);
    CHECK_THROWS_AS(load_dataset("csv:mu=a.csv", 0), ConfigError);
    CHECK_THROWS_AS(load_dataset("gaussian:d=x,tau=1", 0), ConfigError);
    CHECK_THROWS_AS(load_dataset("gaussian:d=2,tau=1,zz=3", 0), ConfigError);
    CHECK_THROWS_AS(load_dataset("hypercube:d=1", 0), ConfigError);
    CHECK_THROWS_AS(load_dataset("csv:mu=/nonexistent/a.csv,nu=/nonexistent/b.csv", 0), ParseError);
}

TEST_CASE("file-backed datasets and the reference cache") {
    const auto dir = scratch_dir();
    std::ofstream(dir / "a.csv") << "x,y\n0,0\n1,0\n0,1\n";
    std::ofstream(dir / "b.csv") << "x,y\n3,0\n4,0\n3,1\n";
    const auto ds = load_dataset("csv:mu=" + (dir / "a.csv").string() + ",nu=" + (dir / "b.csv").string(), 0);
    REQUIRE(ds.discrete());
    const auto cache = (dir / "cache").string();
    CHECK(reference_distance(ds, cache) == doctest::Approx(3.0));
    std::size_t sidecars = 0;
    for (const auto& e : fs::directory_iterator(cache)) {
        ++sidecars;
        CHECK(e.path().filename().string().starts_with("ref-"));
        std::ofstream(e.path()) << "7.5\n"; // a cached value wins over a fresh solve
    }
    CHECK(sidecars == 1);
    CHECK(reference_distance(ds, cache) == 7.5);
    CHECK(reference_distance(ds, "") == doctest::Approx(3.0));

    std::ofstream(dir / "img.pgm") << "P2\n2 2\n9\n1 0\n0 1\n";
    const auto img = load_dataset("pgm:mu=" + (dir / "img.pgm").string() + ",nu=" + (dir / "img.pgm").string(), 0);
    CHECK(img.mu_cloud->size() == 2);
    fs::remove_all(dir);
}

TEST_CASE("slope fit") {
    SUBCASE("exact power law") {
        const std::vector<double> k{8, 16, 32, 64, 128, 256};
        std::vector<double> e;
        for (double x : k) e.push_back(3.0 * std::pow(x, -0.75));
        const auto s = fit_loglog("s", k, e);
        CHECK(s.value == doctest::Approx(-0.75).epsilon(1e-12));
        CHECK(s.points == 3);
        CHECK(s.stderr_ == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("uses the upper half only") {
        const std::vector<double> k{1, 2, 4, 8};
        const std::vector<double> e{100, 1, 0.5, 0.25};
        const auto s = fit_loglog("s", k, e);
        CHECK(s.value == doctest::Approx(-1.0));
        CHECK(s.points == 2);
        CHECK(std::isnan(s.stderr_));
    }
    SUBCASE("zero error gives NaN") {
        const auto s = fit_loglog("s", {1, 2, 4, 8}, {1, 1, 0, 0});
        CHECK(std::isnan(s.value));
    }
    SUBCASE("too few points") {
        CHECK(std::isnan(fit_loglog("s", {4}, {1}).value));
    }
}

TEST_CASE("summaries use the sample standard deviation") {
    const auto s = summarize({1, 2, 3, 4});
    CHECK(s.mean == 2.5);
    CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(summarize({7}).std == 0.0);
}

TEST_CASE("error vs k") {
    SUBCASE("Dirac pair: zero error, undefined slope") {
        auto c = small(Experiment::error_vs_k, "dirac:d=3");
        const auto r = run_error_vs_k(c);
        for (const auto& row : r.rows) CHECK(row.mean_rel_err == 0.0);
        for (const auto& s : r.slopes) CHECK(std::isnan(s.value));
        CHECK(to_csv(c, r).find("value=nan") != std::string::npos);
    }
    SUBCASE("one repetition gives zero std") {
        auto c = small(Experiment::error_vs_k);
        c.reps = 1;
        for (const auto& row : run_error_vs_k(c).rows) CHECK(row.std_rel_err == 0.0);
    }
    SUBCASE("rows and CSV layout") {
        auto c = small(Experiment::error_vs_k);
        c.kappas = {1.0, 0.5};
        const auto r = run_error_vs_k(c);
        CHECK(r.rows.size() == 9);
        CHECK(r.slopes.size() == 3);
        const std::string csv = to_csv(c, r);
        CHECK(csv.starts_with("# qot-bench version=0.1.0 experiment=error-vs-k"));
        CHECK(csv.find("config_hash=") != std::string::npos);
        CHECK(csv.find("\nestimator,seeding,kappa,k,n,mean_rel_err,std,runs\n") != std::string::npos);
        CHECK(csv.find("quantized,kmeanspp,1,16,710,") != std::string::npos);
    }
    SUBCASE("job count does not change the numbers") {
        auto c = small(Experiment::error_vs_k);
        const auto a = to_csv(c, run_error_vs_k(c));
        c.jobs = 4;
        CHECK(to_csv(c, run_error_vs_k(c)) == a);
    }
}

TEST_CASE("cpu time") {
    auto c = small(Experiment::cpu_time);
    c.k_grid = {1, 4};
    const auto r = run_cpu_time(c);
    CHECK(r.rows.size() == 4);
    for (const auto& row : r.rows) CHECK(row.mean_wall_time_s >= 0.0);
    const auto a = strip_timing_columns(to_csv(c, r));
    CHECK(a.find("_s") == std::string::npos);
    CHECK(strip_timing_columns(to_csv(c, run_cpu_time(c))) == a);
}

TEST_CASE("eps sweep") {
    auto c = small(Experiment::eps_sweep, "gaussian:d=2,tau=1e-4,n=200");
    c.eps_grid = {0.02, 0.05, 5.0};
    c.reps = 2;
    const auto r = run_eps_sweep(c);
    CHECK(r.rows.size() == 12);
    for (const auto& row : r.rows) {
        CHECK(row.bound == doctest::Approx(3 * row.eps));
        CHECK(row.abs_error <= row.bound);
        if (row.method == "quantized" && row.eps == 5.0) {
            CHECK(row.k_mu == 1);
            CHECK(row.k_nu == 1);
        }
    }
    auto bad = small(Experiment::eps_sweep);
    bad.eps_grid = {0.1};
    CHECK_THROWS_AS(run_eps_sweep(bad), ConfigError);
}

TEST_CASE("quantization error vs k") {
    SUBCASE("uniform grid decays like 1/k") {
        auto c = small(Experiment::qerr, "grid:side=64");
        c.k_grid = {16, 32, 64, 128, 256, 512};
        c.reps = 5;
        c.lloyd_iters = 20;
        const auto r = run_qerr_vs_k(c);
        REQUIRE(r.slopes.size() == 1);
        CHECK(r.slopes[0].value == doctest::Approx(-1.0).epsilon(0.15));
    }
    SUBCASE("k = n gives zero") {
        auto c = small(Experiment::qerr, "grid:side=3");
        c.k_grid = {3, 9};
        const auto r = run_qerr_vs_k(c);
        CHECK(r.rows.back().mean_phi == 0.0);
        c.k_grid = {3, 10};
        CHECK_THROWS_AS(run_qerr_vs_k(c), ConfigError);
    }
    SUBCASE("clustered mixture plateaus at the within-cluster variance") {
        auto c = small(Experiment::qerr, "mixtures:m=4,d=2,tau=1e-6,n=2000,seed=3");
        c.k_grid = {4, 8, 16};
        c.reps = 20;
        c.lloyd_iters = 30;
        const auto r = run_qerr_vs_k(c);
        // d * tau per point when each cluster gets its own center; seeding can miss a cluster now and then.
        CHECK(r.rows[1].mean_phi <= 2e-6 * 10);
        CHECK(r.rows[2].mean_phi <= 2e-6);
    }
}

TEST_CASE("variance") {
    auto c = small(Experiment::variance, "dirac:d=2");
    const auto r = run_variance(c);
    for (const auto& row : r.rows) {
        CHECK(row.std_estimate == 0.0);
        CHECK(row.mean_estimate == doctest::Approx(std::sqrt(2.0)));
    }
}

TEST_CASE("lloyd") {
    auto c = small(Experiment::lloyd);
    c.lloyd_iters = 5;
    const auto r = run_lloyd(c);
    REQUIRE(r.rows.size() == 6);
    for (const auto& row : r.rows) CHECK(row.phi_increases == 0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r.rows[3 + i].mean_phi <= r.rows[i].mean_phi);

    auto e = small(Experiment::error_vs_k);
    const auto base = run_error_vs_k(e);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& q = base.rows[3 + i];
        REQUIRE(q.estimator == "quantized");
        CHECK(r.rows[i].lloyd_iters == 0);
        CHECK(r.rows[i].mean_rel_err == q.mean_rel_err);
        CHECK(r.rows[i].std_rel_err == q.std_rel_err);
    }
}

TEST_CASE("strip timing columns") {
    const std::string csv = "# meta\na,b_s,c\n1,2,3\n4,5,6\n# slope x\n";
    CHECK(strip_timing_columns(csv) == "# meta\na,c\n1,3\n4,6\n# slope x\n");
}

TEST_CASE("command line") {
    const auto dir = scratch_dir();
    const auto out1 = (dir / "a.csv").string(), out2 = (dir / "b.csv").string();
    const std::string common = " --dataset gaussian:d=2,tau=1e-2 --k-grid 4,8 --reps 2 --seed 3 ";

    SUBCASE("every subcommand is reproducible") {
        for (const std::string sub : {"error-vs-k", "cpu-time", "qerr", "variance", "lloyd"}) {
            CHECK(run_cli(sub + common + "--out " + out1) == 0);
            CHECK(run_cli(sub + common + "--jobs 3 --out " + out2) == 0);
            CHECK(strip_timing_columns(slurp(out1)) == strip_timing_columns(slurp(out2)));
        }
        const std::string eps = " --dataset gaussian:d=2,tau=1e-4,n=100 --eps-grid 0.05,0.1 --reps 1 --seed 3 ";
        CHECK(run_cli("eps-sweep" + eps + "--out " + out1) == 0);
        CHECK(run_cli("eps-sweep" + eps + "--out " + out2) == 0);
        CHECK(strip_timing_columns(slurp(out1)) == strip_timing_columns(slurp(out2)));
    }
    SUBCASE("config file") {
        std::ofstream(dir / "cfg.ini") << "dataset = dirac:d=2\nk-grid = 2,4\nreps = 2\n";
        CHECK(run_cli("--config " + (dir / "cfg.ini").string() + " error-vs-k --out " + out1) == 0);
        CHECK(slurp(out1).find("dataset=\"dirac:d=2\"") != std::string::npos);
    }
    SUBCASE("exit codes") {
        CHECK(run_cli("error-vs-k --k-grid 8,4") == 1);
        CHECK(run_cli("variance --reps 1") == 1);
        CHECK(run_cli("error-vs-k --dataset nope:d=1") == 1);
        CHECK(run_cli("error-vs-k --seeding random") == 1);
        CHECK(run_cli("error-vs-k --isa mips") == 1);
        CHECK(run_cli("no-such-command") == 1);
        CHECK(run_cli("error-vs-k --dataset csv:mu=/nonexistent/a.csv,nu=/nonexistent/b.csv") == 2);
        std::ofstream(dir / "zero.pgm") << "P2\n1 1\n9\n0\n";
        const auto z = (dir / "zero.pgm").string();
        CHECK(run_cli("error-vs-k --dataset pgm:mu=" + z + ",nu=" + z) == 2);
        CHECK(run_cli("error-vs-k --dataset dirac:d=1 --k-grid 1 --reps 1 --isa scalar --out " + out1) == 0);
    }
    fs::remove_all(dir);
}
