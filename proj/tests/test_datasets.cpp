#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "quantot/datasets.hpp"
#include "quantot/errors.hpp"
#include "quantot/exact_ot.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

using namespace quantot;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    TempFile(const std::string& name, const std::string& body) {
        path = fs::temp_directory_path() / ("quantot_test_" + std::to_string(::getpid()) + "_" + name);
        std::ofstream(path) << body;
    }
    ~TempFile() { fs::remove(path); }
    std::string str() const { return path.string(); }
};

double sum(std::span<const double> w) {
    double s = 0;
    for (double x : w) s += x;
    return s;
}

} // namespace

TEST_CASE("Gaussian pair") {
    CHECK(*gaussian_pair(1, 0.1).reference == 1.0);
    CHECK(*gaussian_pair(4, 0.1).reference == 2.0);
    CHECK(*gaussian_pair(5, 1e-4).reference == doctest::Approx(std::sqrt(5.0)));
    CHECK_THROWS_AS(gaussian_pair(0, 1.0), InputError);
    CHECK_THROWS_AS(gaussian_pair(2, 0.0), InputError);

    const auto p = gaussian_pair(3, 0.25);
    Rng rng(1);
    const auto y = p.nu.sample(20000, rng);
    for (std::size_t t = 0; t < 3; ++t) {
        double m = 0, v = 0;
        for (std::size_t i = 0; i < y.rows(); ++i) m += y(i, t) / y.rows();
        for (std::size_t i = 0; i < y.rows(); ++i) v += (y(i, t) - m) * (y(i, t) - m) / y.rows();
        CHECK(m == doctest::Approx(1.0).epsilon(0.02));
        CHECK(v == doctest::Approx(0.25).epsilon(0.05));
    }
}

TEST_CASE("Dirac pair") {
    const auto p = dirac_pair(3);
    Rng rng(2);
    const auto x = p.mu.sample(3, rng), y = p.nu.sample(3, rng);
    for (double v : x.values()) CHECK(v == 0.0);
    for (double v : y.values()) CHECK(v == 1.0);
    CHECK(*p.reference == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("fragmented hypercube") {
    CHECK_THROWS_AS(fragmented_hypercube(1), InputError);
    for (std::size_t d : {2, 5, 8}) {
        const auto p = fragmented_hypercube(d);
        CHECK(*p.reference == doctest::Approx(std::sqrt(8.0)));
        Rng r1(3), r2(3);
        const auto x = p.mu.sample(500, r1);
        const auto y = p.nu.sample(500, r2);
        CHECK(y == hypercube_map(x)); // same seed: nu is the pushed-through mu draw
        double cost = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            CHECK(std::abs(x(i, 0)) <= 0.5);
            CHECK(std::abs(x(i, 1)) <= 0.5);
            for (std::size_t t = 2; t < d; ++t) {
                CHECK(x(i, t) >= 0.0);
                CHECK(x(i, t) <= 1.0);
                CHECK(y(i, t) == x(i, t));
            }
            for (std::size_t t = 0; t < d; ++t) cost += std::pow(y(i, t) - x(i, t), 2) / x.rows();
        }
        CHECK(cost == doctest::Approx(8.0).epsilon(1e-12));
    }
    const auto m = hypercube_map(Matrix::from_rows({{0.2, 0.3, 0.9}, {-0.1, 0.4, 0.5}}));
    CHECK(m(0, 0) == doctest::Approx(2.2));
    CHECK(m(0, 1) == doctest::Approx(2.3));
    CHECK(m(0, 2) == 0.9);
    CHECK(m(1, 0) == doctest::Approx(-2.1));
    CHECK(m(1, 1) == doctest::Approx(2.4));
}

TEST_CASE("empirical sampler") {
    const DiscreteMeasure m(Matrix::from_rows({{0.0}, {1.0}, {2.0}}), {0.2, 0.0, 0.8});
    const auto s = empirical_sampler(m, "three");
    Rng rng(4);
    const auto x = s.sample(10000, rng);
    double twos = 0;
    for (double v : x.values()) {
        CHECK(v != 1.0);
        twos += v == 2.0;
    }
    CHECK(twos / 10000 == doctest::Approx(0.8).epsilon(0.03));
    Rng a(5), b(5);
    CHECK(s.sample(50, a) == s.sample(50, b));
}

TEST_CASE("sampled mixtures") {
    SUBCASE("shape") {
        Rng rng(6);
        const auto [mu, nu] = sampled_mixtures(3, 15, 1e-3, 10000, rng);
        CHECK(mu.size() == 10000);
        CHECK(mu.dim() == 15);
        CHECK(nu.size() == 10000);
        CHECK(sum(mu.weights()) == doctest::Approx(1.0));
    }
    SUBCASE("zero variance repeats the means") {
        Rng rng(7);
        const auto [mu, nu] = sampled_mixtures(4, 2, 0.0, 200, rng);
        std::set<std::pair<double, double>> distinct;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            distinct.insert({mu.point(i)[0], mu.point(i)[1]});
            CHECK(mu.point(i)[0] >= 0.0);
            CHECK(mu.point(i)[0] <= 1.0);
        }
        CHECK(distinct.size() <= 4);
        CHECK(distinct.size() >= 2);
    }
    SUBCASE("deterministic") {
        Rng r1(8), r2(8);
        const auto a = sampled_mixtures(5, 3, 1e-4, 300, r1);
        const auto b = sampled_mixtures(5, 3, 1e-4, 300, r2);
        CHECK(a.first.support() == b.first.support());
        CHECK(a.second.support() == b.second.support());
    }
    SUBCASE("errors") {
        Rng rng(9);
        CHECK_THROWS_AS(sampled_mixtures(0, 2, 1.0, 10, rng), InputError);
        CHECK_THROWS_AS(sampled_mixtures(2, 2, -1.0, 10, rng), InputError);
    }
}

TEST_CASE("uniform grid") {
    const auto g = uniform_grid(4);
    CHECK(g.size() == 16);
    CHECK(g.point(0)[0] == doctest::Approx(0.125));
    CHECK(g.point(15)[1] == doctest::Approx(0.875));
    CHECK_THROWS_AS(uniform_grid(0), InputError);
}

TEST_CASE("CSV loading") {
    SUBCASE("standardize two rows") {
        TempFile f("two.csv", "0\n2\n");
        const auto m = load_csv_pointcloud(f.str(), {.standardize = true});
        REQUIRE(m.size() == 2);
        CHECK(m.point(0)[0] == doctest::Approx(-1.0));
        CHECK(m.point(1)[0] == doctest::Approx(1.0));
        CHECK(m.weights()[0] == 0.5);
    }
    SUBCASE("header and plain values") {
        TempFile f("hdr.csv", "x,y\n1,2\n3,4\n5,6\n");
        const auto m = load_csv_pointcloud(f.str());
        REQUIRE(m.size() == 3);
        CHECK(m.dim() == 2);
        CHECK(m.point(2)[1] == 6.0);
    }
    SUBCASE("weight column by name and by index") {
        TempFile f("w.csv", "x,y,w\n0,0,0.25\n1,1,0.75\n");
        const auto m = load_csv_pointcloud(f.str(), {.weight_column = "w"});
        CHECK(m.dim() == 2);
        CHECK(m.weights()[0] == 0.25);
        CHECK(m.weights()[1] == 0.75);
        TempFile g("wi.csv", "0.25,0,0\n0.75,1,1\n");
        const auto n = load_csv_pointcloud(g.str(), {.weight_column = "0"});
        CHECK(n.dim() == 2);
        CHECK(n.weights()[1] == 0.75);
        CHECK(n.point(1)[0] == 1.0);
    }
    SUBCASE("weights that do not sum to one") {
        TempFile f("bad_w.csv", "x,w\n0,0.5\n1,0.6\n");
        CHECK_THROWS_AS(load_csv_pointcloud(f.str(), {.weight_column = "w"}), ParseError);
        CHECK_THROWS_AS(load_csv_pointcloud(f.str(), {.weight_column = "nope"}), ParseError);
    }
    SUBCASE("ragged rows name the line") {
        TempFile f("ragged.csv", "1,2\n3,4\n5\n");
        try {
            load_csv_pointcloud(f.str());
            FAIL("no error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("non-numeric cell names line and column") {
        TempFile f("nan.csv", "1,2\n3,abc\n");
        try {
            load_csv_pointcloud(f.str());
            FAIL("no error");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("line 2") != std::string::npos);
            CHECK(msg.find("column 2") != std::string::npos);
        }
    }
    SUBCASE("constant column under standardize") {
        TempFile f("const.csv", "1,5\n3,5\n5,5\n");
        std::vector<std::string> warnings;
        const auto m = load_csv_pointcloud(f.str(), {.standardize = true}, &warnings);
        CHECK(warnings.size() == 1);
        for (std::size_t i = 0; i < 3; ++i) CHECK(m.point(i)[1] == 0.0);
        double var = 0;
        for (std::size_t i = 0; i < 3; ++i) var += m.point(i)[0] * m.point(i)[0] / 3;
        CHECK(var == doctest::Approx(1.0));
    }
    SUBCASE("missing file and empty file") {
        CHECK_THROWS_AS(load_csv_pointcloud("/nonexistent/quantot.csv"), ParseError);
        TempFile f("empty.csv", "x,y\n");
        CHECK_THROWS_AS(load_csv_pointcloud(f.str()), ParseError);
    }
}

TEST_CASE("PGM loading") {
    SUBCASE("single pixel") {
        TempFile f("one.pgm", "P2\n1 1\n255\n17\n");
        const auto m = load_grid_image(f.str());
        REQUIRE(m.size() == 1);
        CHECK(m.point(0)[0] == 0.5);
        CHECK(m.point(0)[1] == 0.5);
        CHECK(m.weights()[0] == 1.0);
    }
    SUBCASE("two pixels with intensities 1 and 3") {
        TempFile f("two.pgm", "P2\n# a comment\n2 1\n3\n1 3\n");
        const auto m = load_grid_image(f.str());
        REQUIRE(m.size() == 2);
        CHECK(m.weights()[0] == 0.25);
        CHECK(m.weights()[1] == 0.75);
        CHECK(m.point(0)[0] == 0.25);
        CHECK(m.point(1)[0] == 0.75);
        CHECK(m.point(1)[1] == 0.5);
    }
    SUBCASE("row-major coordinates and dropped black pixels") {
        TempFile f("rows.pgm", "P2\n2 2\n9\n0 4\n2 0\n");
        const auto m = load_grid_image(f.str());
        REQUIRE(m.size() == 2);
        CHECK(m.point(0)[0] == 0.75);
        CHECK(m.point(0)[1] == 0.25);
        CHECK(m.point(1)[0] == 0.25);
        CHECK(m.point(1)[1] == 0.75);
        CHECK(sum(m.weights()) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("uniform 64x64 image") {
        std::string body = "P2\n64 64\n255\n";
        for (int i = 0; i < 64 * 64; ++i) body += "200\n";
        TempFile f("flat.pgm", body);
        const auto m = load_grid_image(f.str());
        CHECK(m.size() == 4096);
        CHECK(std::abs(sum(m.weights()) - 1.0) <= 1e-12);
        CHECK(m.weights()[100] == doctest::Approx(1.0 / 4096));
        CHECK(w2_distance(m, m) == 0.0);
    }
    SUBCASE("errors") {
        TempFile zero("zero.pgm", "P2\n2 1\n255\n0 0\n");
        CHECK_THROWS_AS(load_grid_image(zero.str()), InputError);
        TempFile magic("magic.pgm", "P5\n1 1\n255\n1\n");
        CHECK_THROWS_AS(load_grid_image(magic.str()), ParseError);
        TempFile trunc("trunc.pgm", "P2\n2 2\n255\n1 2 3\n");
        CHECK_THROWS_AS(load_grid_image(trunc.str()), ParseError);
        TempFile hdr("hdr.pgm", "P2\nx 2\n255\n1 2\n");
        CHECK_THROWS_AS(load_grid_image(hdr.str()), ParseError);
        TempFile over("over.pgm", "P2\n1 1\n10\n11\n");
        CHECK_THROWS_AS(load_grid_image(over.str()), ParseError);
    }
}
