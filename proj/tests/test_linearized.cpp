#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "thomlab/error.hpp"
#include "thomlab/linearized.hpp"

#include <cmath>
#include <random>

using namespace thomlab;

namespace {

Mat random_symmetric(std::mt19937_64& rng, int n, double scale) {
    std::normal_distribution<double> gauss;
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = scale * gauss(rng);
    return 0.5 * (a + a.transpose());
}

// Gram matrix assembled straight from its definition, independent of vectorize().
Mat reference_gram(const Mat& A, double m) {
    const int n = static_cast<int>(A.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    Mat B = -A + (m * m / 4.0) * Mat::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        const double l = es.eigenvalues()[i];
        const Vec ph = es.eigenvectors().col(i);
        if (l > m * m / 4.0) B += 2.0 * (l - m * m / 4.0) * ph * ph.transpose();
    }
    Mat G = Mat::Zero(2 * n, 2 * n);
    G.topLeftCorner(n, n) = 2.0 / (m * m) * B;
    G.bottomRightCorner(n, n) = 2.0 / (m * m) * Mat::Identity(n, n);
    return G;
}

} // namespace

TEST_CASE("scalar kernel mode") {
    Mat A(1, 1);
    A << 0.0;
    const auto s = vectorize(A, 1.0);
    CHECK(s.index_set[0] == IndexSet::I3);
    CHECK(s.gamma_plus[0].real() == doctest::Approx(1.0));
    CHECK(s.gamma_minus[0].real() == doctest::Approx(0.0));
    CHECK(s.indices(IndexSet::I3) == std::vector<int>{0});
}

TEST_CASE("scalar repeated root") {
    Mat A(1, 1);
    A << 0.25;
    const auto s = vectorize(A, -1.0);
    CHECK(s.index_set[0] == IndexSet::I2);
    CHECK(s.gamma_plus[0] == s.gamma_minus[0]);
    const auto c = check_vectorization(s);
    CHECK(c.gram_identity <= 1e-12);
    CHECK(c.l_action <= 1e-12);
    CHECK(c.adjoint_action <= 1e-12);
}

TEST_CASE("index sets partition and psi basis is G-orthonormal on random A") {
    std::mt19937_64 rng(17);
    for (double m : {-1.0, 1.0, -2.0, 2.0}) {
        for (int trial = 0; trial < 5; ++trial) {
            const int n = 2 + trial;
            Mat A = random_symmetric(rng, n, 1.0);
            const auto s = vectorize(A, m);
            CHECK(s.psi.size() == static_cast<std::size_t>(2 * n));
            std::size_t total = 0;
            for (auto set : {IndexSet::I1, IndexSet::I2, IndexSet::I3, IndexSet::I4}) total += s.indices(set).size();
            CHECK(total == static_cast<std::size_t>(n));
            CHECK((s.G - reference_gram(s.A, m)).norm() <= 1e-12 * s.G.norm());
            const auto c = check_vectorization(s);
            CHECK(c.g_positive_min > 0.0);
            CHECK(c.gram_identity <= 1e-10);
            CHECK(c.l_action <= 1e-10);
            CHECK(c.adjoint_action <= 1e-10);
        }
    }
}

TEST_CASE("all four index sets at once") {
    // lambda = 1 (I1 for m=-1), 1/4 (I2), 0 (I3), -2 (I4), in a rotated basis.
    std::mt19937_64 rng(2);
    const Mat Q = Eigen::HouseholderQR<Mat>(random_symmetric(rng, 4, 1.0)).householderQ();
    Vec d(4);
    d << 1.0, 0.25, 0.0, -2.0;
    const Mat A = Q * d.asDiagonal() * Q.transpose();
    const auto s = vectorize(A, -1.0);
    CHECK(s.indices(IndexSet::I1).size() == 1);
    CHECK(s.indices(IndexSet::I2).size() == 1);
    CHECK(s.indices(IndexSet::I3).size() == 1);
    CHECK(s.indices(IndexSet::I4).size() == 1);
    const auto c = check_vectorization(s);
    CHECK(c.gram_identity <= 1e-10);
    CHECK(c.l_action <= 1e-10);
    CHECK(c.adjoint_action <= 1e-10);
}

TEST_CASE("G-adjoint satisfies the defining identity") {
    std::mt19937_64 rng(8);
    const auto s = vectorize(random_symmetric(rng, 5, 1.0), -1.0);
    std::normal_distribution<double> gauss;
    for (int k = 0; k < 10; ++k) {
        Vec x(10), y(10);
        for (int i = 0; i < 10; ++i) {
            x[i] = gauss(rng);
            y[i] = gauss(rng);
        }
        const double lhs = (s.L * x).dot(s.G * y);
        const double rhs = x.dot(s.G * (s.L_adjoint * y));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("coefficient projection") {
    std::mt19937_64 rng(4);
    Vec d(3);
    d << 0.0, 2.0, -1.0;
    const Mat Q = Eigen::HouseholderQR<Mat>(random_symmetric(rng, 3, 1.0)).householderQ();
    const auto s = vectorize(Q * d.asDiagonal() * Q.transpose(), -1.0);
    const int j = s.indices(IndexSet::I3).at(0);

    SUBCASE("kernel eigenvector with zero velocity") {
        const auto r = project_coefficients(s, s.phi.col(j), Vec::Zero(3));
        for (const auto& e : r.entries) {
            if (e.index != j) CHECK(std::abs(e.value) <= 1e-12);
        }
        const Vec sum = r.value(j, PsiKind::Plus) * s.psi[2 * j].psi + r.value(j, PsiKind::Minus) * s.psi[2 * j + 1].psi;
        CHECK((sum - r.q).norm() <= 1e-12);
    }
    SUBCASE("a basis vector projects to a unit coefficient") {
        const int i = s.indices(IndexSet::I1).at(0);
        const Vec q = s.psi[2 * i].psi;
        const Vec u = q.head(3);
        const Vec udot = q.tail(3) + (s.m / 2.0) * u;
        const auto r = project_coefficients(s, u, udot);
        for (const auto& e : r.entries) {
            const double expect = (e.index == i && e.kind == PsiKind::Xi1) ? 1.0 : 0.0;
            CHECK(std::abs(e.value - expect) <= 1e-12);
        }
    }
    SUBCASE("Parseval") {
        std::normal_distribution<double> gauss;
        for (int k = 0; k < 10; ++k) {
            Vec u(3), ud(3);
            for (int i = 0; i < 3; ++i) {
                u[i] = gauss(rng);
                ud[i] = gauss(rng);
            }
            const auto r = project_coefficients(s, u, ud);
            double sum = 0.0;
            for (const auto& e : r.entries) sum += e.value * e.value;
            CHECK(std::abs(sum - r.q.dot(s.G * r.q)) <= 1e-10 * sum);
            CHECK(r.reconstruction_error <= 1e-10);
        }
    }
    CHECK_THROWS_AS(project_coefficients(s, Vec::Zero(2), Vec::Zero(3)), Error);
}

TEST_CASE("invalid input") {
    Mat A(2, 2);
    A << 1, 2, 0, 1;
    CHECK_THROWS_AS(vectorize(A, 1.0), Error);
    CHECK_THROWS_AS(vectorize(Mat::Identity(2, 2), 0.0), Error);
}
