#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "thomlab/error.hpp"
#include "thomlab/potential.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

using namespace thomlab;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Potential random_potential(std::mt19937_64& rng, int n, int max_deg, int n_terms, int min_deg = 0) {
    std::uniform_int_distribution<int> var(0, n - 1);
    std::uniform_int_distribution<int> deg(min_deg, max_deg);
    std::normal_distribution<double> gauss;
    std::vector<Term> ts;
    for (int k = 0; k < n_terms; ++k) {
        std::vector<int> e(n, 0);
        const int d = deg(rng);
        for (int j = 0; j < d; ++j) ++e[var(rng)];
        ts.push_back(Term{e, gauss(rng)});
    }
    return Potential(n, ts);
}

Vec random_vec(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> gauss;
    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = scale * gauss(rng);
    return y;
}

// Independent evaluator: direct std::pow products, no shared code with eval().
double naive_eval(const Potential& g, const Vec& y) {
    long double s = 0.0L;
    for (const auto& t : g.terms()) {
        long double v = t.coef;
        for (int i = 0; i < g.dimension(); ++i) v *= std::pow(static_cast<long double>(y[i]), t.exps[i]);
        s += v;
    }
    return static_cast<double>(s);
}

} // namespace

TEST_CASE("eval on the bubble-sheet cubic") {
    const auto f = Potential::bubble_sheet();
    CHECK(f.eval(vec({1, 0, 0})) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
    // Frozen from a symbolic evaluation: -4 sqrt(2)/3.
    const double s = -1.0 / std::sqrt(2.0);
    CHECK(f.eval(vec({s, s, 0})) == doctest::Approx(-4.0 * std::sqrt(2.0) / 3.0).epsilon(1e-14));
    CHECK(Potential::norm_power(3, 2, 0.25).eval(Vec::Zero(3)) == 0.0);
    CHECK_THROWS_AS(f.eval(vec({1, 0})), Error);
}

TEST_CASE("eval agrees with a long-double reference on random polynomials") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 6;
        const auto g = random_potential(rng, n, 8, 12);
        const Vec y = random_vec(rng, n, 0.8);
        CHECK(g.eval(y) == doctest::Approx(naive_eval(g, y)).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("grad closed forms") {
    const auto q = Potential::norm_power(2, 2, 0.25);
    const Vec g = q.grad(vec({1, 0}));
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == 0.0);
    const auto f = Potential::bubble_sheet();
    for (double a : {0.3, -1.2, 2.0}) {
        const Vec d = f.grad(vec({a, a, 0}));
        CHECK(d[0] == doctest::Approx(8 * a * a).epsilon(1e-14));
        CHECK(d[1] == doctest::Approx(8 * a * a).epsilon(1e-14));
        CHECK(d[2] == 0.0);
    }
}

TEST_CASE("grad and hessian match central differences on random potentials") {
    std::mt19937_64 rng(11);
    const double h = 1e-5;
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + trial % 6;
        const auto g = random_potential(rng, n, 8, 10);
        const Vec y = random_vec(rng, n, 0.7);
        const Vec grad = g.grad(y);
        const Mat hess = g.hessian(y);
        CHECK((hess - hess.transpose()).norm() == 0.0);
        const double gscale = std::max(1.0, grad.norm());
        const double hscale = std::max(1.0, hess.norm());
        for (int i = 0; i < n; ++i) {
            Vec yp = y, ym = y;
            yp[i] += h;
            ym[i] -= h;
            const double fd = (g.eval(yp) - g.eval(ym)) / (2 * h);
            CHECK(std::abs(fd - grad[i]) <= 1e-6 * gscale);
            const Vec fdg = (g.grad(yp) - g.grad(ym)) / (2 * h);
            CHECK((fdg - hess.col(i)).norm() <= 1e-6 * hscale);
        }
    }
}

TEST_CASE("hessian special cases") {
    CHECK(Potential::norm_power(3, 2, 0.25).hessian(Vec::Zero(3)).norm() == 0.0);
    const auto q = Potential::diagonal_quadratic({1.5, -2.0, 0.25});
    const Mat h = q.hessian(vec({0.3, 7.0, -1.0}));
    CHECK((h - Vec(vec({1.5, -2.0, 0.25})).asDiagonal().toDenseMatrix()).norm() == 0.0);
}

TEST_CASE("homogeneous components and order") {
    const auto f = Potential::bubble_sheet();
    const auto cf = f.homogeneous_components();
    REQUIRE(cf.size() == 1);
    CHECK(cf.begin()->first == 3);
    CHECK(cf.at(3) == f);
    CHECK(f.order_p() == 3);

    const auto g = Potential::norm_power(2, 2, 0.25) + Potential::norm_power(2, 3, 1.0);
    const auto cg = g.homogeneous_components();
    REQUIRE(cg.size() == 2);
    CHECK(cg.at(4) == Potential::norm_power(2, 2, 0.25));
    CHECK(cg.at(6) == Potential::norm_power(2, 3, 1.0));
    CHECK(g.order_p() == 4);

    CHECK(Potential::diagonal_quadratic({1, 2}).order_p() == 2);

    const Potential lin(2, {Term{{1, 0}, 1.0}, Term{{2, 0}, 1.0}});
    CHECK_THROWS_AS(lin.homogeneous_components(), Error);
    const Potential cst(2, {Term{{0, 0}, 1.0}});
    try {
        cst.order_p();
        FAIL("expected NotFlowPotential");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotFlowPotential);
    }
}

TEST_CASE("components re-sum to the original coefficients") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 5;
        const auto g = random_potential(rng, n, 8, 15, 2);
        Potential sum(n, {});
        for (const auto& [d, c] : g.homogeneous_components()) {
            CHECK(c.is_homogeneous());
            CHECK(c.homogeneous_degree() == d);
            sum = sum + c;
        }
        CHECK(sum == g);
    }
}

TEST_CASE("canonical ordering merges duplicates and drops zeros") {
    const Potential a(2, {Term{{0, 2}, 1.0}, Term{{2, 0}, 2.0}, Term{{0, 2}, -1.0}, Term{{1, 1}, 3.0}});
    REQUIRE(a.terms().size() == 2);
    CHECK(a.terms()[0].exps == std::vector<int>{2, 0});
    CHECK(a.terms()[1].exps == std::vector<int>{1, 1});
    CHECK_THROWS_AS(Potential(2, {Term{{1, 1, 1}, 1.0}}), Error);
}

TEST_CASE("radial derivative and Euler identity") {
    CHECK(Potential::norm_power(2, 2, 0.25).radial_derivative(vec({1, 0})) == doctest::Approx(1.0));
    CHECK(Potential::bubble_sheet().radial_derivative(vec({1, 0, 0})) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK_THROWS_AS(Potential::bubble_sheet().radial_derivative(Vec::Zero(3)), Error);

    std::mt19937_64 rng(5);
    for (int p = 2; p <= 7; ++p) {
        std::vector<Term> ts;
        std::normal_distribution<double> gauss;
        for (int k = 0; k < 6; ++k) {
            std::vector<int> e(3, 0);
            for (int j = 0; j < p; ++j) ++e[rng() % 3];
            ts.push_back(Term{e, gauss(rng)});
        }
        const Potential g(3, ts);
        for (int i = 0; i < 20; ++i) {
            const Vec y = random_vec(rng, 3);
            const double lhs = y.norm() * g.radial_derivative(y);
            const double rhs = p * g.eval(y);
            CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(rhs), y.norm() * g.grad(y).norm()));
        }
    }
}

TEST_CASE("Euler identity per homogeneous component") {
    std::mt19937_64 rng(21);
    const auto g = random_potential(rng, 4, 8, 25, 2);
    for (int i = 0; i < 10; ++i) {
        const Vec y = random_vec(rng, 4, 0.5);
        for (const auto& [d, c] : g.homogeneous_components()) {
            const double lhs = y.norm() * c.radial_derivative(y);
            CHECK(std::abs(lhs - d * c.eval(y)) <= 1e-12 * std::max(1e-300, y.norm() * c.grad(y).norm()));
        }
    }
}

TEST_CASE("spherical gradient") {
    CHECK(Potential::norm_power(3, 2, 0.25).spherical_gradient(vec({0.1, -0.4, 2.0})).norm() <= 1e-15);
    const auto f = Potential::bubble_sheet();
    for (double a : {0.5, -0.1}) CHECK(f.spherical_gradient(vec({a, a, 0})).norm() <= 1e-14);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 40; ++i) {
        const auto g = random_potential(rng, 4, 6, 8, 2);
        const Vec y = random_vec(rng, 4);
        const Vec s = g.spherical_gradient(y);
        CHECK(std::abs(s.dot(y)) <= 1e-12 * std::max(1e-300, g.grad(y).norm() * y.norm()));
    }
}

TEST_CASE("normalized value") {
    CHECK(Potential::norm_power(2, 2, 0.25).normalized_value(vec({0.3, 0.2}), 4) == doctest::Approx(0.25));
    const auto f = Potential::bubble_sheet();
    for (double t : {1e-3, 0.5, 3.0}) {
        const Vec y = vec({-t / std::sqrt(2.0), -t / std::sqrt(2.0), 0});
        CHECK(f.normalized_value(y, 3) == doctest::Approx(-4.0 * std::sqrt(2.0) / 3.0).epsilon(1e-13));
    }
    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        const Vec y = random_vec(rng, 3);
        CHECK(f.normalized_value(y, 3) == doctest::Approx(f.eval(y / y.norm())).epsilon(1e-12));
    }
    CHECK_THROWS_AS(f.normalized_value(Vec::Zero(3), 3), Error);
}

TEST_CASE("JSON round trip") {
    std::mt19937_64 rng(1);
    const auto g = random_potential(rng, 3, 6, 10).with_label("rt");
    const auto back = Potential::from_json(g.to_json());
    CHECK(back == g);
    CHECK(back.label() == "rt");
    CHECK(back.to_json().dump() == g.to_json().dump());
    const auto path = std::filesystem::temp_directory_path() / "thomlab_potential_rt.json";
    g.save(path.string());
    CHECK(Potential::load(path.string()) == g);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(Potential::load("/nonexistent/p.json"), Error);
    CHECK_THROWS_AS(Potential::from_json(nlohmann::json{{"n", 2}}), Error);
}
