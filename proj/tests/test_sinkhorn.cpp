#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "quantot/errors.hpp"
#include "quantot/exact_ot.hpp"
#include "quantot/rng.hpp"
#include "quantot/sinkhorn.hpp"

#include <cmath>
#include <numeric>

using namespace quantot;

namespace {

Matrix random_points(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(n, d);
    for (double& v : m.values()) v = g(rng);
    return m;
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(n);
    for (double& x : w) x = u(rng);
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= s;
    return w;
}

double l1_marginal_gap(const Matrix& p, std::span<const double> a, std::span<const double> b) {
    double g = 0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double r = 0;
        for (std::size_t j = 0; j < p.cols(); ++j) r += p(i, j);
        g += std::abs(r - a[i]);
    }
    for (std::size_t j = 0; j < p.cols(); ++j) {
        double c = 0;
        for (std::size_t i = 0; i < p.rows(); ++i) c += p(i, j);
        g += std::abs(c - b[j]);
    }
    return g;
}

double max_marginal_gap(const Matrix& p, std::span<const double> a, std::span<const double> b) {
    double g = 0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double r = 0;
        for (std::size_t j = 0; j < p.cols(); ++j) r += p(i, j);
        g = std::max(g, std::abs(r - a[i]));
    }
    for (std::size_t j = 0; j < p.cols(); ++j) {
        double c = 0;
        for (std::size_t i = 0; i < p.rows(); ++i) c += p(i, j);
        g = std::max(g, std::abs(c - b[j]));
    }
    return g;
}

} // namespace

TEST_CASE("sinkhorn on trivial problems") {
    SUBCASE("one atom") {
        const std::vector<double> one{1.0};
        const auto s = sinkhorn_scale(one, one, CostMatrix(Matrix::from_rows({{3.0}})), {.eta = 0.1});
        CHECK(s.converged);
        CHECK(s.iterations == 1);
        CHECK(s.coupling(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("large eta gives the independent coupling") {
        const std::vector<double> h{0.5, 0.5};
        const auto s = sinkhorn_scale(h, h, CostMatrix(Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}})), {.eta = 1e6});
        for (double v : s.coupling.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
    }
    SUBCASE("small eta approaches the exact plan") {
        const std::vector<double> h{0.5, 0.5};
        const auto s =
            sinkhorn_scale(h, h, CostMatrix(Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}})), {.eta = 1e-3});
        CHECK(s.coupling(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(s.coupling(0, 1) < 1e-100);
    }
}

TEST_CASE("sinkhorn input checks") {
    const CostMatrix c(Matrix(2, 2, 1.0));
    const std::vector<double> h{0.5, 0.5};
    CHECK_THROWS_AS(sinkhorn_scale(std::vector<double>{1.0, 0.0}, h, c, {}), InputError);
    CHECK_THROWS_AS(sinkhorn_scale(h, h, c, {.eta = 0.0}), InputError);
    CHECK_THROWS_AS(sinkhorn_scale(std::vector<double>{1.0}, h, c, {}), InputError);
    CHECK_THROWS_AS(approx_solve(h, h, c, 0.0), InputError);
    CHECK_THROWS_AS(approx_solve(std::vector<double>{0.5, 0.6}, h, c, 0.1), InputError);
}

TEST_CASE("dual objective never decreases") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n1 = 3 + trial % 9, n2 = 4 + trial % 5;
        const auto a = random_weights(n1, rng), b = random_weights(n2, rng);
        const auto c = squared_euclidean_cost(random_points(n1, 2, rng), random_points(n2, 2, rng));
        std::vector<double> trace;
        const auto s = sinkhorn_scale(a, b, c, {.eta = 0.05, .stop_tolerance = 1e-12, .max_iter = 300,
                                                .dual_trace = &trace});
        REQUIRE(trace.size() == s.iterations);
        for (std::size_t t = 1; t < trace.size(); ++t)
            CHECK(trace[t] >= trace[t - 1] - 1e-12 * std::max(1.0, std::abs(trace[t])));
        // Weak duality with the exact optimum.
        CHECK(trace.back() <= solve_exact(a, b, c).cost + 1e-9);
    }
}

TEST_CASE("non-convergence is reported, not thrown") {
    Rng rng(2);
    const auto a = random_weights(20, rng), b = random_weights(20, rng);
    const auto c = squared_euclidean_cost(random_points(20, 2, rng), random_points(20, 2, rng));
    const auto s = sinkhorn_scale(a, b, c, {.eta = 1e-3, .stop_tolerance = 0.0, .max_iter = 3});
    CHECK_FALSE(s.converged);
    CHECK(s.iterations == 3);
    CHECK(s.marginal_violation > 0.0);
}

TEST_CASE("rounding") {
    Rng rng(3);
    SUBCASE("feasible input is unchanged") {
        const auto a = random_weights(5, rng), b = random_weights(7, rng);
        const auto c = squared_euclidean_cost(random_points(5, 2, rng), random_points(7, 2, rng));
        const Matrix p = solve_exact(a, b, c).plan.matrix();
        const Matrix r = round_to_feasible(p, a, b);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(r.values()[i] == doctest::Approx(p.values()[i]).epsilon(1e-12));
    }
    SUBCASE("perturbed independent coupling") {
        const auto a = random_weights(6, rng), b = random_weights(4, rng);
        Matrix p(6, 4);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 4; ++j) p(i, j) = a[i] * b[j] * (i % 2 ? 1.3 : 0.8);
        const Matrix r = round_to_feasible(p, a, b);
        CHECK(max_marginal_gap(r, a, b) <= 1e-12);
    }
    SUBCASE("l1 bound on random infeasible couplings") {
        std::uniform_real_distribution<double> u(0, 1);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n1 = 1 + trial % 10, n2 = 1 + trial % 7;
            const auto a = random_weights(n1, rng), b = random_weights(n2, rng);
            Matrix p(n1, n2);
            for (double& v : p.values()) v = u(rng) * 2.0 / double(n1 * n2);
            const Matrix r = round_to_feasible(p, a, b);
            double dist = 0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                CHECK(r.values()[i] >= 0.0);
                dist += std::abs(r.values()[i] - p.values()[i]);
            }
            CHECK(dist <= 2 * l1_marginal_gap(p, a, b) + 1e-12);
            CHECK(max_marginal_gap(r, a, b) <= 1e-12);
        }
    }
}

TEST_CASE("approx_solve guarantee against the exact solver") {
    Rng rng(4);
    SUBCASE("Diracs") {
        const std::vector<double> one{1.0};
        for (double eps : {1e-3, 1.0, 100.0}) {
            const auto r = approx_solve(one, one, CostMatrix(Matrix::from_rows({{2.0}})), eps);
            CHECK(r.cost == doctest::Approx(2.0).epsilon(1e-14));
        }
    }
    SUBCASE("uniform Gaussian clouds, n = 50") {
        const std::vector<double> u(50, 1.0 / 50);
        for (int trial = 0; trial < 5; ++trial) {
            const auto c = squared_euclidean_cost(random_points(50, 2, rng), random_points(50, 2, rng));
            const double eps = 0.05 * c.max_entry();
            const auto r = approx_solve(u, u, c, eps);
            CHECK(r.converged);
            CHECK(std::abs(r.cost - solve_exact(u, u, c).cost) <= eps);
            CHECK(max_marginal_gap(r.plan, u, u) <= 1e-12);
        }
    }
    SUBCASE("eps grid on weighted instances") {
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t n1 = 5 + trial * 3, n2 = 4 + trial * 2;
            const auto a = random_weights(n1, rng), b = random_weights(n2, rng);
            const auto c = squared_euclidean_cost(random_points(n1, 3, rng), random_points(n2, 3, rng));
            const double exact = solve_exact(a, b, c).cost;
            for (double f : {0.01, 0.05, 0.1}) {
                const double eps = f * c.max_entry();
                const auto r = approx_solve(a, b, c, eps);
                CHECK(std::abs(r.cost - exact) <= eps);
                CHECK(r.cost >= 0.0);
                CHECK(r.iterations <= kDefaultSinkhornIterations);
                CHECK(r.eta == doctest::Approx(eps / (4 * std::log(double(std::max(n1, n2))))));
            }
        }
    }
    SUBCASE("eps above the cost range") {
        const auto a = random_weights(8, rng), b = random_weights(8, rng);
        const auto c = squared_euclidean_cost(random_points(8, 2, rng), random_points(8, 2, rng));
        const auto r = approx_solve(a, b, c, 2 * c.max_entry());
        CHECK(r.eta > 0.0);
        CHECK(std::abs(r.cost - solve_exact(a, b, c).cost) <= 2 * c.max_entry());
    }
    SUBCASE("zero weights get empty rows and columns") {
        const std::vector<double> a{0.5, 0.0, 0.5}, b{0.0, 1.0};
        const auto c = squared_euclidean_cost(random_points(3, 2, rng), random_points(2, 2, rng));
        const auto r = approx_solve(a, b, c, 0.01);
        REQUIRE(r.plan.rows() == 3);
        REQUIRE(r.plan.cols() == 2);
        CHECK(r.plan(1, 0) == 0.0);
        CHECK(r.plan(1, 1) == 0.0);
        CHECK(r.plan(0, 0) == 0.0);
        CHECK(r.cost == doctest::Approx(solve_exact(a, b, c).cost).epsilon(1e-12));
    }
}

TEST_CASE("log-domain stability on large costs") {
    Rng rng(5);
    const auto a = random_weights(30, rng), b = random_weights(25, rng);
    const auto c = squared_euclidean_cost(random_points(30, 2, rng, 300.0), random_points(25, 2, rng, 300.0));
    REQUIRE(c.max_entry() > 1e5);
    const auto s = sinkhorn_scale(a, b, c, {.eta = 1e-3 * c.max_entry(), .max_iter = 2000});
    for (double v : s.coupling.values()) CHECK(std::isfinite(v));
    for (double v : s.f) CHECK(std::isfinite(v));
    for (double v : s.g) CHECK(std::isfinite(v));
    const auto r = approx_solve(a, b, c, 1e-3 * c.max_entry());
    CHECK(std::isfinite(r.cost));
    CHECK(std::abs(r.cost - solve_exact(a, b, c).cost) <= 1e-3 * c.max_entry());
}

TEST_CASE("iterations do not grow with eps") {
    Rng rng(6);
    double prev = INFINITY;
    std::vector<std::pair<std::vector<double>, CostMatrix>> instances;
    for (int i = 0; i < 5; ++i) {
        instances.emplace_back(random_weights(40, rng),
                               squared_euclidean_cost(random_points(40, 2, rng), random_points(40, 2, rng)));
    }
    const std::vector<double> u(40, 1.0 / 40);
    for (double f : {0.005, 0.01, 0.02, 0.05, 0.1, 0.2}) {
        double mean = 0;
        for (const auto& [a, c] : instances) mean += double(approx_solve(a, u, c, f * c.max_entry()).iterations);
        mean /= double(instances.size());
        CHECK(mean <= prev);
        prev = mean;
    }
}
