#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "thomlab/error.hpp"
#include "thomlab/flow.hpp"
#include "thomlab/sphere_critical.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace thomlab;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Vec sph(double th, double ph) { return vec({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)}); }

// Brute-force oracle on S^2: local minima of |grad' f| on a dense latitude/longitude
// grid, refined by a derivative-free pattern search in (theta, phi).
std::vector<Vec> brute_force_critical(const Potential& f) {
    const int nt = 180, np = 360;
    std::vector<std::vector<double>> r(nt + 1, std::vector<double>(np));
    for (int i = 0; i <= nt; ++i)
        for (int j = 0; j < np; ++j)
            r[i][j] = f.spherical_gradient(sph(std::numbers::pi * i / nt, 2 * std::numbers::pi * j / np)).norm();
    std::vector<Vec> out;
    for (int i = 0; i <= nt; ++i) {
        for (int j = 0; j < np; ++j) {
            bool is_min = r[i][j] < 0.3;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    const int ii = i + di;
                    if (ii < 0 || ii > nt || (di == 0 && dj == 0)) continue;
                    if (r[ii][(j + dj + np) % np] < r[i][j]) is_min = false;
                }
            if (!is_min) continue;
            double th = std::numbers::pi * i / nt, ph = 2 * std::numbers::pi * j / np, h = 0.01;
            double best = r[i][j];
            while (h > 1e-13) {
                bool moved = false;
                for (auto [a, b] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                    const double v = f.spherical_gradient(sph(th + a * h, ph + b * h)).norm();
                    if (v < best) {
                        best = v;
                        th += a * h;
                        ph += b * h;
                        moved = true;
                    }
                }
                if (!moved) h *= 0.5;
            }
            if (best > 1e-8) continue;
            const Vec w = sph(th, ph);
            bool dup = false;
            for (const auto& u : out) dup = dup || (u - w).norm() < 1e-4;
            if (!dup) out.push_back(w);
        }
    }
    return out;
}

bool contains_direction(const std::vector<CriticalPoint>& pts, const Vec& w, double tol) {
    for (const auto& c : pts)
        if ((c.direction - w).norm() < tol) return true;
    return false;
}

} // namespace

TEST_CASE("radial quartic: whole circle is critical and forms one orbit") {
    const auto pts = critical_points(Potential::norm_power(2, 2, 1.0), 50, 1e-9, 1);
    REQUIRE(pts.size() > 10);
    std::set<int> orbits;
    for (const auto& c : pts) {
        CHECK(c.value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(c.direction.norm() - 1.0) <= 1e-12);
        REQUIRE(c.orbit_id.has_value());
        orbits.insert(*c.orbit_id);
    }
    CHECK(orbits.size() == 1);
}

TEST_CASE("quadratic form with distinct eigenvalues") {
    const Potential q(2, {Term{{2, 0}, 3.0}, Term{{0, 2}, -1.5}});
    const auto pts = critical_points(q, 40, 1e-9, 3);
    REQUIRE(pts.size() == 4);
    CHECK(contains_direction(pts, vec({1, 0}), 1e-9));
    CHECK(contains_direction(pts, vec({-1, 0}), 1e-9));
    CHECK(contains_direction(pts, vec({0, 1}), 1e-9));
    CHECK(contains_direction(pts, vec({0, -1}), 1e-9));
    for (const auto& c : pts) {
        CHECK(!c.orbit_id.has_value());
        CHECK(c.value == doctest::Approx(std::abs(c.direction[0]) > 0.5 ? 3.0 : -1.5));
    }
}

TEST_CASE("bubble-sheet cubic matches the brute-force oracle") {
    const auto f = Potential::bubble_sheet();
    const auto oracle = brute_force_critical(f);
    // The grid oracle finds exactly six isolated critical directions.
    REQUIRE(oracle.size() == 6);
    const auto pts = critical_points(f, 200, 1e-9, 7);
    REQUIRE(pts.size() == oracle.size());
    for (const auto& w : oracle) CHECK(contains_direction(pts, w, 1e-6));
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(contains_direction(pts, vec({s, s, 0}), 1e-9));
    CHECK(contains_direction(pts, vec({-s, -s, 0}), 1e-9));
    CHECK(contains_direction(pts, vec({1, 0, 0}), 1e-9));
    CHECK(contains_direction(pts, vec({0, -1, 0}), 1e-9));
    std::vector<double> values;
    for (const auto& c : pts) {
        CHECK(!c.orbit_id.has_value());
        CHECK(c.residual <= 1e-9);
        values.push_back(c.value);
    }
    const double a = 4.0 * std::sqrt(2.0) / 3.0, b = 8.0 / 3.0;
    const std::vector<double> expect{-b, -b, -a, a, b, b};
    for (std::size_t i = 0; i < 6; ++i) CHECK(values[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("Lagrange condition and scaling invariance") {
    const Potential g(3, {Term{{4, 0, 0}, 1.0}, Term{{2, 2, 0}, -0.7}, Term{{1, 1, 2}, 1.3}, Term{{0, 0, 4}, 0.4},
                          Term{{0, 3, 1}, 0.2}});
    const auto pts = critical_points(g, 150, 1e-9, 5);
    REQUIRE(!pts.empty());
    for (const auto& c : pts) CHECK((g.grad(c.direction) - 4 * c.value * c.direction).norm() <= 1e-8);
    for (double c : {-2.0, 5.0}) {
        const auto scaled = critical_points(g.scaled(c), 150, 1e-9, 5);
        CHECK(scaled.size() == pts.size());
        for (const auto& p : pts) CHECK(contains_direction(scaled, p.direction, 1e-7));
    }
}

TEST_CASE("non-homogeneous input is rejected") {
    const auto g = Potential::norm_power(2, 2) + Potential::norm_power(2, 3);
    CHECK_THROWS_AS(critical_points(g, 10, 1e-9, 0), Error);
}

TEST_CASE("Adams-Simon verdicts") {
    const auto q4 = Potential::norm_power(3, 2, 1.0);
    CHECK(adams_simon(q4, AdamsSimonMode::parabolic()).verdict == AdamsSimon::Positive);
    CHECK(adams_simon(-q4, AdamsSimonMode::parabolic()).verdict == AdamsSimon::Fails);
    CHECK(adams_simon(-q4, AdamsSimonMode::elliptic_with(-1.0)).verdict == AdamsSimon::Positive);
    const auto f = Potential::bubble_sheet();
    CHECK(adams_simon(f, AdamsSimonMode::parabolic()).verdict == AdamsSimon::Positive);
    CHECK(adams_simon(-f, AdamsSimonMode::parabolic()).verdict == AdamsSimon::Positive);
    const Potential x2(2, {Term{{2, 0}, 0.0}});
    const auto zero = adams_simon(x2, AdamsSimonMode::parabolic());
    CHECK(zero.verdict == AdamsSimon::Fails);
    CHECK(zero.diagnostic.find("constant") != std::string::npos);
    // -y1^2 y2^2: best critical value is 0 (axes); the diagonals give -1/4.
    const Potential d(2, {Term{{2, 2}, -1.0}});
    CHECK(adams_simon(d, AdamsSimonMode::parabolic()).verdict == AdamsSimon::NonnegativeOnly);
}

TEST_CASE("ansatz closed form and ODE residual") {
    const auto q = Potential::norm_power(2, 2, 0.25);
    const Vec x = ansatz_solution(q, vec({1, 0}), 1.0);
    CHECK(x[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(x[1] == 0.0);

    const auto g = -Potential::bubble_sheet();
    const double s = 1.0 / std::sqrt(2.0);
    const Vec w = vec({-s, -s, 0});
    const Vec xa = ansatz_solution(g, w, 1.0);
    CHECK((xa - w / (4.0 * std::sqrt(2.0))).norm() <= 1e-15);

    for (const auto& [pot, dir] : {std::pair{q, vec({0.6, 0.8})}, std::pair{g, w}}) {
        for (double t : {0.5, 3.0, 1e3}) {
            const double h = 1e-4 * t;
            const Vec deriv = (ansatz_solution(pot, dir, t + h) - ansatz_solution(pot, dir, t - h)) / (2 * h);
            const Vec grad = pot.grad(ansatz_solution(pot, dir, t));
            CHECK((deriv + grad).norm() <= 1e-7 * grad.norm());
        }
        // Exact algebraic residual at the sample time.
        const double t = 2.0;
        const int p = pot.homogeneous_degree();
        const Vec xt = ansatz_solution(pot, dir, t);
        const Vec exact_deriv = -xt / ((p - 2) * t);
        CHECK((exact_deriv + pot.grad(xt)).norm() <= 1e-10 * pot.grad(xt).norm());
    }
    CHECK_THROWS_AS(ansatz_solution(-q, vec({1, 0}), 1.0), Error);
    CHECK_THROWS_AS(ansatz_solution(Potential::diagonal_quadratic({1, 1}), vec({1, 0}), 1.0), Error);
}
