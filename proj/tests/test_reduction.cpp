#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "thomlab/error.hpp"
#include "thomlab/flow.hpp"
#include "thomlab/reduction.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace thomlab;

namespace {

constexpr double kPi = std::numbers::pi;

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("kernel is the cos/sin pair") {
    const ReducedModel rm(PdeModel::cubic());
    REQUIRE(rm.kernel_dim() == 2);
    CHECK(rm.kernel_indices() == std::vector<int>{1, 2});
    const Mat B = rm.kernel_basis();
    CHECK((B.transpose() * B - Mat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("H vanishes to first order at the origin") {
    const ReducedModel rm(PdeModel::cubic());
    CHECK(rm.solve_H(v2(0, 0)).norm() == 0.0);
    const double d = 1e-4;
    for (const auto& e : {v2(1, 0), v2(0, 1)}) CHECK(rm.solve_H(d * e).norm() / d <= 1e-8);
    CHECK(rm.reduced_value(v2(0, 0)) == 0.0);
    CHECK(rm.reduced_gradient(v2(0, 0)).norm() == 0.0);
}

TEST_CASE("leading-order H along cos(theta)") {
    const ReducedModel rm(PdeModel::cubic());
    const double A = 0.05;
    // u = A cos(theta) has kernel coordinate x1 = A sqrt(pi).
    const Vec H = rm.solve_H(v2(A * std::sqrt(kPi), 0));
    Vec expect = Vec::Zero(rm.dim());
    expect[5] = -std::pow(A, 3) / 32 * std::sqrt(kPi);  // cos(3 theta) = sqrt(pi) * mode
    CHECK((H - expect).norm() / std::sqrt(kPi) <= 10 * std::pow(A, 5));
    for (int i : rm.kernel_indices()) CHECK(H[i] == 0.0);
    CHECK(rm.complement_residual(v2(A * std::sqrt(kPi), 0)) <= 1e-12);
    CHECK(rm.reduced_value(v2(A * std::sqrt(kPi), 0)) == doctest::Approx(3 * kPi / 16 * std::pow(A, 4)).epsilon(0.01));
}

TEST_CASE("trust radius") {
    const ReducedModel rm(PdeModel::cubic());
    try {
        rm.solve_H(v2(0.6, 0));
        FAIL("expected NoConvergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoConvergence);
    }
}

TEST_CASE("reduced gradient matches finite differences and is rotation invariant") {
    const ReducedModel rm(PdeModel::cubic());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 50; ++i) {
        Vec v = v2(u(rng), u(rng));
        v *= 0.25 * std::abs(u(rng)) / v.norm() + 0.02 / v.norm();
        Vec d = v2(u(rng), u(rng)).normalized();
        const double h = 1e-4 * v.norm();
        const double fd = (rm.reduced_value(v + h * d) - rm.reduced_value(v - h * d)) / (2 * h);
        const double an = rm.reduced_gradient(v).dot(d);
        CHECK(std::abs(fd - an) <= 1e-6 * rm.reduced_gradient(v).norm());
        const double psi = 2 * kPi * u(rng);
        const Vec rv = v2(std::cos(psi) * v[0] - std::sin(psi) * v[1], std::sin(psi) * v[0] + std::cos(psi) * v[1]);
        CHECK(rm.reduced_value(rv) == doctest::Approx(rm.reduced_value(v)).epsilon(1e-8));
    }
}

TEST_CASE("fitted reduced functional") {
    SUBCASE("cubic model is quartic and positive") {
        const auto fit = fit_reduced_polynomial(ReducedModel(PdeModel::cubic()));
        REQUIRE(fit.p == 4);
        const double c = 3.0 / (16.0 * kPi);
        CHECK(fit.f_p.eval(v2(1, 0)) == doctest::Approx(c).epsilon(0.01));
        CHECK(fit.f_p.eval(v2(std::sqrt(0.5), std::sqrt(0.5))) == doctest::Approx(c).epsilon(0.01));
        CHECK(fit.degree_norms.at(2) < 1e-10);
        CHECK(fit.degree_norms.at(3) < 1e-10);
        const auto as = adams_simon_from_reduction(fit);
        CHECK(as.verdict == AdamsSimon::Positive);
    }
    SUBCASE("sign-flipped model fails the positivity test") {
        const auto fit = fit_reduced_polynomial(ReducedModel(PdeModel::sign_flipped()));
        REQUIRE(fit.p == 4);
        CHECK(fit.f_p.eval(v2(1, 0)) == doctest::Approx(-3.0 / (16.0 * kPi)).epsilon(0.01));
        CHECK(adams_simon_from_reduction(fit).verdict == AdamsSimon::Fails);
    }
    SUBCASE("linear model is integrable") {
        const auto fit = fit_reduced_polynomial(ReducedModel(PdeModel::linear()));
        CHECK_FALSE(fit.p.has_value());
        for (const auto& [d, n] : fit.degree_norms) CHECK(n < 1e-10);
        const auto as = adams_simon_from_reduction(fit);
        CHECK(as.verdict == AdamsSimon::Fails);
        CHECK(as.diagnostic.find("constant") != std::string::npos);
    }
    SUBCASE("too few radii for the requested degree") {
        CHECK_THROWS_AS(fit_reduced_polynomial(ReducedModel(PdeModel::cubic()), {0.02, 0.04}, 32, 7), Error);
    }
}

TEST_CASE("reduced gradient flow tracks the PDE neutral coordinates") {
    const auto fit = fit_reduced_polynomial(ReducedModel(PdeModel::cubic()));
    PdeOptions o;
    o.K = 32;
    o.t_end = 1e3;
    const auto pde = slow_decay_report(0.1, 0.4, PdeModel::cubic(), o).run;
    FlowOptions fo;
    const auto red = integrate_gradient(fit.f, pde.x.front(), 0.0, 1e3, fo);
    REQUIRE(red.t.size() == pde.t.size());
    for (std::size_t i = 0; i < red.t.size(); ++i) {
        CHECK(red.t[i] == doctest::Approx(pde.t[i]));
        CHECK((red.y[i] - pde.x[i]).norm() <= 0.03 * pde.x[i].norm());
    }
}
