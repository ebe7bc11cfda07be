#include "thomlab/reduction.hpp"

#include "thomlab/error.hpp"

#include <cmath>
#include <numbers>

namespace thomlab {

namespace {
constexpr double kPi = std::numbers::pi;
}

ReducedModel::ReducedModel(PdeModel model, ReductionSettings settings)
    : model_(std::move(model)), settings_(settings) {
    const int K = settings_.K;
    if (K < 2) throw Error(ErrorKind::InvalidArgument, "reduction needs K >= 2");
    const int n = 2 * K + 1;
    lambda_.resize(n);
    lambda_[0] = 1.0;
    for (int k = 1; k <= K; ++k) lambda_[2 * k - 1] = lambda_[2 * k] = 1.0 - static_cast<double>(k) * k;
    for (int i = 0; i < n; ++i) (std::abs(lambda_[i]) < settings_.gap_tol ? kernel_ : complement_).push_back(i);

    // Quadrature on 4K+4 points integrates products of four band-limited fields exactly.
    const int N = 4 * K + 4;
    weight_ = 2.0 * kPi / N;
    basis_.resize(N, n);
    for (int j = 0; j < N; ++j) {
        const double th = 2.0 * kPi * j / N;
        basis_(j, 0) = 1.0 / std::sqrt(2.0 * kPi);
        for (int k = 1; k <= K; ++k) {
            basis_(j, 2 * k - 1) = std::cos(k * th) / std::sqrt(kPi);
            basis_(j, 2 * k) = std::sin(k * th) / std::sqrt(kPi);
        }
    }
}

Mat ReducedModel::kernel_basis() const {
    Mat B = Mat::Zero(dim(), kernel_dim());
    for (int j = 0; j < kernel_dim(); ++j) B(kernel_[j], j) = 1.0;
    return B;
}

Vec ReducedModel::M(const Vec& xi) const {
    Vec out = lambda_.cwiseProduct(xi);
    if (model_.s != 0.0) {
        const Vec u = basis_ * xi;
        out += model_.s * weight_ * (basis_.transpose() * u.array().cube().matrix());
    }
    return out;
}

double ReducedModel::energy(const Vec& xi) const {
    double F = -0.5 * lambda_.dot(xi.cwiseAbs2());
    if (model_.s != 0.0) F -= 0.25 * model_.s * weight_ * (basis_ * xi).array().pow(4).sum();
    return F;
}

Vec ReducedModel::embed(const Vec& v) const {
    if (v.size() != kernel_dim()) throw Error(ErrorKind::DimensionMismatch, "kernel vector has the wrong length");
    Vec xi = Vec::Zero(dim());
    for (int j = 0; j < kernel_dim(); ++j) xi[kernel_[j]] = v[j];
    return xi;
}

Vec ReducedModel::solve_H(const Vec& v) const {
    const Vec base = embed(v);
    if (v.norm() > settings_.rho) {
        throw Error(ErrorKind::NoConvergence, "|v| = " + std::to_string(v.norm()) + " exceeds the trust radius " +
                                                  std::to_string(settings_.rho));
    }
    const int m = static_cast<int>(complement_.size());
    Vec h = Vec::Zero(m);
    const auto full = [&](const Vec& hc) {
        Vec xi = base;
        for (int i = 0; i < m; ++i) xi[complement_[i]] = hc[i];
        return xi;
    };
    const auto restrict = [&](const Vec& xi) {
        Vec r(m);
        for (int i = 0; i < m; ++i) r[i] = xi[complement_[i]];
        return r;
    };
    Mat Bc(basis_.rows(), m);
    for (int i = 0; i < m; ++i) Bc.col(i) = basis_.col(complement_[i]);

    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= settings_.max_iter; ++it) {
        const Vec xi = full(h);
        const Vec r = restrict(M(xi));
        const double rn = r.norm();
        if (rn <= settings_.tol) return xi - base;
        // Stagnation at round-off level counts as converged.
        if (it > 3 && rn >= 0.5 * prev && rn < 1e-11) return xi - base;
        if (it == settings_.max_iter || !std::isfinite(rn)) break;
        prev = rn;
        Mat J = Mat::Zero(m, m);
        for (int i = 0; i < m; ++i) J(i, i) = lambda_[complement_[i]];
        if (model_.s != 0.0) {
            const Vec u2 = (basis_ * xi).array().square().matrix();
            J += 3.0 * model_.s * weight_ * Bc.transpose() * u2.asDiagonal() * Bc;
        }
        Eigen::FullPivLU<Mat> lu(J);
        if (!lu.isInvertible() || lu.rcond() < 1e-14) {
            throw Error(ErrorKind::SingularJacobian, "complement Jacobian is singular at |v| = " + std::to_string(v.norm()));
        }
        h -= lu.solve(r);
    }
    throw Error(ErrorKind::NoConvergence, "Newton iteration for H did not converge at |v| = " + std::to_string(v.norm()));
}

double ReducedModel::reduced_value(const Vec& v) const { return energy(embed(v) + solve_H(v)); }

Vec ReducedModel::reduced_gradient(const Vec& v) const {
    const Vec Mx = M(embed(v) + solve_H(v));
    Vec g(kernel_dim());
    for (int j = 0; j < kernel_dim(); ++j) g[j] = -Mx[kernel_[j]];
    return g;
}

double ReducedModel::complement_residual(const Vec& v) const {
    const Vec Mx = M(embed(v) + solve_H(v));
    double s = 0.0;
    for (int i : complement_) s += Mx[i] * Mx[i];
    return std::sqrt(s);
}

nlohmann::json ReducedFit::to_json() const {
    nlohmann::json norms = nlohmann::json::object();
    for (const auto& [d, v] : degree_norms) norms[std::to_string(d)] = v;
    return {{"p", p ? nlohmann::json(*p) : nlohmann::json(nullptr)},
            {"coefficients", f.to_json()},
            {"leading_part", f_p.to_json()},
            {"degree_norms", norms},
            {"residual", residual},
            {"condition", condition},
            {"radii", radii},
            {"n_directions", n_directions},
            {"max_degree", max_degree}};
}

ReducedFit fit_reduced_polynomial(const ReducedModel& model, const std::vector<double>& radii, int n_directions,
                                  int max_degree) {
    if (model.kernel_dim() != 2) throw Error(ErrorKind::InvalidArgument, "fit expects a two-dimensional kernel");
    if (radii.empty() || n_directions < 1 || max_degree < 2) throw Error(ErrorKind::InvalidArgument, "bad fit grid");
    for (double r : radii) {
        if (!(r > 0.0) || r > model.settings().rho) throw Error(ErrorKind::InvalidArgument, "radius outside trust region");
    }
    std::vector<std::pair<int, int>> cols;  // (degree, exponent of x1)
    for (int d = 2; d <= max_degree; ++d) {
        for (int a = d; a >= 0; --a) cols.emplace_back(d, a);
    }
    const int rows = static_cast<int>(radii.size()) * n_directions;
    Mat D(rows, static_cast<int>(cols.size()));
    Vec rhs(rows);
    int row = 0;
    for (double r : radii) {
        for (int j = 0; j < n_directions; ++j) {
            // Half-step offset keeps samples off the coordinate axes.
            const double phi = 2.0 * std::numbers::pi * (j + 0.5) / n_directions;
            Vec v(2);
            v << r * std::cos(phi), r * std::sin(phi);
            rhs[row] = model.reduced_value(v);
            for (std::size_t c = 0; c < cols.size(); ++c) {
                D(row, c) = std::pow(v[0], cols[c].second) * std::pow(v[1], cols[c].first - cols[c].second);
            }
            ++row;
        }
    }
    Vec scale = D.colwise().norm().transpose();
    for (int c = 0; c < scale.size(); ++c) {
        if (scale[c] == 0.0) throw Error(ErrorKind::DegenerateFit, "empty design column");
        D.col(c) /= scale[c];
    }
    Eigen::JacobiSVD<Mat> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    ReducedFit fit;
    fit.condition = sv[0] / sv[sv.size() - 1];
    fit.radii = radii;
    fit.n_directions = n_directions;
    fit.max_degree = max_degree;
    if (!(fit.condition < 1e12) || rows < static_cast<int>(cols.size())) {
        throw Error(ErrorKind::DegenerateFit,
                    "design matrix condition " + std::to_string(fit.condition) + " (too few radii or directions for degree " +
                        std::to_string(max_degree) + ")");
    }
    const Vec coef = svd.solve(rhs).cwiseQuotient(scale);

    std::vector<Term> all;
    std::map<int, std::vector<Term>> by_degree;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto [d, a] = cols[c];
        fit.degree_norms[d] = std::hypot(fit.degree_norms[d], coef[c]);
        Term t{{a, d - a}, coef[c]};
        all.push_back(t);
        by_degree[d].push_back(t);
    }
    for (const auto& [d, nrm] : fit.degree_norms) {
        if (nrm > 1e-8) {
            fit.p = d;
            break;
        }
    }
    fit.f = Potential(2, all, "reduced_" + model.model().name);
    if (fit.p) fit.f_p = Potential(2, by_degree[*fit.p], "reduced_leading_" + model.model().name);

    // Relative misfit, guarded for the identically zero case.
    const Vec pred = (D * svd.solve(rhs));
    const double fscale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
    fit.residual = (pred - rhs).cwiseAbs().maxCoeff() / fscale;
    return fit;
}

AdamsSimonResult adams_simon_from_reduction(const ReducedFit& fit) {
    return adams_simon(fit.f_p, AdamsSimonMode::parabolic());
}

} // namespace thomlab
