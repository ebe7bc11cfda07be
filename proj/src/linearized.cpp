#include "thomlab/linearized.hpp"

#include "thomlab/error.hpp"

#include <cmath>

namespace thomlab {

std::vector<int> LinearizedSystem::indices(IndexSet s) const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i) {
        if (index_set[i] == s) out.push_back(i);
    }
    return out;
}

std::string_view to_string(IndexSet s) {
    switch (s) {
    case IndexSet::I1: return "I1";
    case IndexSet::I2: return "I2";
    case IndexSet::I3: return "I3";
    case IndexSet::I4: return "I4";
    }
    return "?";
}

std::string_view to_string(PsiKind k) {
    switch (k) {
    case PsiKind::Xi1: return "xi1";
    case PsiKind::Xi2: return "xi2";
    case PsiKind::Xi3: return "xi3";
    case PsiKind::Xi4: return "xi4";
    case PsiKind::Plus: return "plus";
    case PsiKind::Minus: return "minus";
    }
    return "?";
}

LinearizedSystem vectorize(const Mat& A, double m, double zero_tol) {
    if (A.rows() != A.cols() || A.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "A must be square");
    if (m == 0.0 || !std::isfinite(m)) throw Error(ErrorKind::InvalidArgument, "m must be a nonzero real");
    const double scale = std::max(1.0, A.norm());
    if ((A - A.transpose()).norm() > 1e-12 * scale) throw Error(ErrorKind::InvalidArgument, "A is not symmetric");

    LinearizedSystem s;
    s.A = 0.5 * (A + A.transpose());
    s.m = m;
    Eigen::SelfAdjointEigenSolver<Mat> es(s.A);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::NoConvergence, "eigen-solver failed on A");
    s.lambda = es.eigenvalues();
    s.phi = es.eigenvectors();

    const int n = s.n();
    const double quarter = m * m / 4.0;
    const double snap = zero_tol * std::max(scale, quarter);
    s.index_set.resize(n);
    s.beta.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double& l = s.lambda[i];
        if (std::abs(l - quarter) <= snap) {
            l = quarter;
            s.index_set[i] = IndexSet::I2;
        } else if (std::abs(l) <= snap) {
            l = 0.0;
            s.index_set[i] = IndexSet::I3;
        } else if (l > quarter) {
            s.index_set[i] = IndexSet::I1;
            s.beta[i] = std::sqrt(l - quarter);
        } else {
            s.index_set[i] = IndexSet::I4;
        }
        const std::complex<double> root = std::sqrt(std::complex<double>(quarter - l, 0.0));
        s.gamma_plus.push_back(m / 2.0 + root);
        s.gamma_minus.push_back(m / 2.0 - root);
    }

    s.L = Mat::Zero(2 * n, 2 * n);
    s.L.topLeftCorner(n, n) = (m / 2.0) * Mat::Identity(n, n);
    s.L.topRightCorner(n, n) = Mat::Identity(n, n);
    s.L.bottomLeftCorner(n, n) = -s.A + quarter * Mat::Identity(n, n);
    s.L.bottomRightCorner(n, n) = (m / 2.0) * Mat::Identity(n, n);

    // B = -A + m^2/4 + sum_{I1} 2 beta^2 phi phi^T + sum_{I2} phi phi^T, assembled in
    // the phi basis so that snapped eigenvalues are used consistently.
    Vec bdiag(n);
    for (int i = 0; i < n; ++i) {
        switch (s.index_set[i]) {
        case IndexSet::I1: bdiag[i] = s.beta[i] * s.beta[i]; break;
        case IndexSet::I2: bdiag[i] = 1.0; break;
        default: bdiag[i] = quarter - s.lambda[i]; break;
        }
    }
    const Mat B = s.phi * bdiag.asDiagonal() * s.phi.transpose();
    s.G = Mat::Zero(2 * n, 2 * n);
    s.G.topLeftCorner(n, n) = (2.0 / (m * m)) * B;
    s.G.bottomRightCorner(n, n) = (2.0 / (m * m)) * Mat::Identity(n, n);
    s.L_adjoint = s.G.ldlt().solve(s.L.transpose() * s.G);

    const double r2 = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
        const Vec ph = s.phi.col(i);
        const auto make = [&](double top, double bottom) {
            Vec v(2 * n);
            v << top * ph, bottom * ph;
            return v;
        };
        switch (s.index_set[i]) {
        case IndexSet::I1:
            s.psi.push_back({i, PsiKind::Xi1, make(0.0, m / r2)});
            s.psi.push_back({i, PsiKind::Xi2, make(m / (r2 * s.beta[i]), 0.0)});
            break;
        case IndexSet::I2:
            s.psi.push_back({i, PsiKind::Xi3, make(0.0, m / r2)});
            s.psi.push_back({i, PsiKind::Xi4, make(m / r2, 0.0)});
            break;
        case IndexSet::I3:
        case IndexSet::I4: {
            const double gp = s.gamma_plus[i].real();
            const double gm = s.gamma_minus[i].real();
            s.psi.push_back({i, PsiKind::Plus, make(m / (m - 2.0 * gp), -m / 2.0)});
            s.psi.push_back({i, PsiKind::Minus, make(m / (m - 2.0 * gm), -m / 2.0)});
            break;
        }
        }
    }
    return s;
}

VectorizationCheck check_vectorization(const LinearizedSystem& s) {
    VectorizationCheck c;
    const int k = static_cast<int>(s.psi.size());
    Mat P(2 * s.n(), k);
    for (int a = 0; a < k; ++a) P.col(a) = s.psi[a].psi;
    const Mat gram = P.transpose() * s.G * P;
    c.gram_identity = (gram - Mat::Identity(k, k)).cwiseAbs().maxCoeff();

    const double half = s.m / 2.0;
    for (int a = 0; a < k; ++a) {
        const auto& p = s.psi[a];
        const double b = s.beta[p.index];
        Vec expect_l, expect_adj;
        switch (p.kind) {
        case PsiKind::Xi1:   // partner Xi2 follows
            expect_l = half * p.psi + b * s.psi[a + 1].psi;
            expect_adj = half * p.psi - b * s.psi[a + 1].psi;
            break;
        case PsiKind::Xi2:
            expect_l = half * p.psi - b * s.psi[a - 1].psi;
            expect_adj = half * p.psi + b * s.psi[a - 1].psi;
            break;
        case PsiKind::Xi3:   // partner Xi4 follows
            expect_l = half * p.psi + s.psi[a + 1].psi;
            expect_adj = half * p.psi;
            break;
        case PsiKind::Xi4:
            expect_l = half * p.psi;
            expect_adj = half * p.psi + s.psi[a - 1].psi;
            break;
        case PsiKind::Plus:
            expect_l = expect_adj = s.gamma_plus[p.index].real() * p.psi;
            break;
        case PsiKind::Minus:
            expect_l = expect_adj = s.gamma_minus[p.index].real() * p.psi;
            break;
        }
        c.l_action = std::max(c.l_action, (s.L * p.psi - expect_l).cwiseAbs().maxCoeff());
        c.adjoint_action = std::max(c.adjoint_action, (s.L_adjoint * p.psi - expect_adj).cwiseAbs().maxCoeff());
    }
    Eigen::SelfAdjointEigenSolver<Mat> eg(s.G, Eigen::EigenvaluesOnly);
    c.g_positive_min = eg.eigenvalues().minCoeff();
    return c;
}

double CoefficientRecord::value(int index, PsiKind kind) const {
    for (const auto& e : entries) {
        if (e.index == index && e.kind == kind) return e.value;
    }
    throw Error(ErrorKind::InvalidArgument, "no coefficient " + std::string(to_string(kind)) + " for index " +
                                                std::to_string(index));
}

CoefficientRecord project_coefficients(const LinearizedSystem& s, const Vec& u, const Vec& udot) {
    const int n = s.n();
    if (u.size() != n || udot.size() != n) throw Error(ErrorKind::DimensionMismatch, "u/udot length differs from n");
    CoefficientRecord r;
    r.q.resize(2 * n);
    r.q << u, udot - (s.m / 2.0) * u;
    const Vec gq = s.G * r.q;
    Vec recon = Vec::Zero(2 * n);
    for (const auto& p : s.psi) {
        const double c = p.psi.dot(gq);
        r.entries.push_back({p.index, p.kind, c});
        recon += c * p.psi;
    }
    r.reconstruction_error = (recon - r.q).norm() / std::max(1.0, r.q.norm());
    return r;
}

} // namespace thomlab
