#include "thomlab/sphere_critical.hpp"

#include "thomlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>

namespace thomlab {

namespace {

double angle_between(const Vec& a, const Vec& b) {
    return 2.0 * std::asin(std::min(1.0, 0.5 * (a - b).norm()));
}

double sphere_residual(const Potential& g, const Vec& w) { return g.spherical_gradient(w).norm(); }

// Orthonormal basis of the tangent space at unit w (columns).
Mat tangent_basis(const Vec& w) {
    const int n = static_cast<int>(w.size());
    Eigen::HouseholderQR<Mat> qr(w);
    const Mat Q = qr.householderQ();
    return Q.rightCols(n - 1);
}

// Riemannian Hessian of the restriction, expressed in the tangent basis T.
Mat tangent_hessian(const Potential& g, const Vec& w, const Mat& T) {
    const double mu = w.dot(g.grad(w));
    const int n = static_cast<int>(w.size());
    return T.transpose() * (g.hessian(w) - mu * Mat::Identity(n, n)) * T;
}

// Bordered Newton on grad g(w) = mu w, |w| = 1 with residual-based damping.
// Minimum-norm steps keep it well defined on curves of critical points.
std::optional<Vec> newton_polish(const Potential& g, Vec w, double tol, int max_iter = 60) {
    const int n = static_cast<int>(w.size());
    w.normalize();
    double res = sphere_residual(g, w);
    for (int it = 0; it < max_iter && res > tol; ++it) {
        const Vec grad = g.grad(w);
        const double mu = w.dot(grad);
        Mat J = Mat::Zero(n + 1, n + 1);
        J.topLeftCorner(n, n) = g.hessian(w) - mu * Mat::Identity(n, n);
        J.topRightCorner(n, 1) = -w;
        J.bottomLeftCorner(1, n) = w.transpose();
        Vec F(n + 1);
        F << grad - mu * w, 0.5 * (w.squaredNorm() - 1.0);
        const Vec step = J.completeOrthogonalDecomposition().solve(-F);
        double lam = 1.0;
        bool improved = false;
        for (int k = 0; k < 12; ++k, lam *= 0.5) {
            const Vec trial = (w + lam * step.head(n)).normalized();
            const double r = sphere_residual(g, trial);
            if (r < res) {
                w = trial;
                res = r;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (!(res <= tol)) return std::nullopt;
    return w;
}

// Normalized projected descent of s * g on the sphere.
Vec projected_descent(const Potential& g, Vec w, double s, int iters = 400) {
    double eta = 0.2;
    double val = s * g.eval(w);
    for (int it = 0; it < iters && eta > 1e-10; ++it) {
        const Vec sg = g.spherical_gradient(w);
        const double norm = sg.norm();
        if (norm == 0.0) break;
        const Vec trial = (w - s * eta * sg / norm).normalized();
        const double tv = s * g.eval(trial);
        if (tv < val) {
            w = trial;
            val = tv;
            eta = std::min(0.5, eta * 1.2);
        } else {
            eta *= 0.5;
        }
    }
    return w;
}

Vec random_unit(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> gauss;
    Vec v(n);
    do {
        for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    } while (v.norm() < 1e-12);
    return v.normalized();
}

bool lex_less(const Vec& a, const Vec& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

// Follows a curve of critical points through w0 along the null direction of the
// tangent Hessian. Returns the traced points (excluding w0).
std::vector<Vec> trace_orbit(const Potential& g, const Vec& w0, double step, double tol, double degeneracy) {
    std::vector<Vec> out;
    Mat T = tangent_basis(w0);
    Eigen::SelfAdjointEigenSolver<Mat> es(tangent_hessian(g, w0, T));
    const Vec evals = es.eigenvalues().cwiseAbs();
    Eigen::Index kmin;
    evals.minCoeff(&kmin);
    Vec dir = T * es.eigenvectors().col(kmin);
    Vec w = w0;
    const int max_steps = static_cast<int>(std::ceil(2.0 * std::numbers::pi / step)) + 5;
    for (int k = 0; k < max_steps; ++k) {
        const auto next = newton_polish(g, (w + step * dir).normalized(), tol);
        if (!next) break;
        const double moved = angle_between(*next, w);
        if (moved < 0.25 * step) break;
        if (k > 2 && angle_between(*next, w0) < 0.75 * step) break;
        out.push_back(*next);
        T = tangent_basis(*next);
        Eigen::SelfAdjointEigenSolver<Mat> e2(tangent_hessian(g, *next, T));
        const Vec ev = e2.eigenvalues().cwiseAbs();
        ev.minCoeff(&kmin);
        if (ev[kmin] > degeneracy) break;
        Vec nd = T * e2.eigenvectors().col(kmin);
        if (nd.dot(dir) < 0.0) nd = -nd;
        dir = nd;
        w = *next;
    }
    return out;
}

} // namespace

std::vector<CriticalPoint> critical_points(const Potential& gp, const CriticalSearchOptions& opts) {
    if (gp.is_zero() || !gp.is_homogeneous()) {
        throw Error(ErrorKind::InvalidArgument, "critical_points needs a nonzero homogeneous polynomial");
    }
    const int p = gp.homogeneous_degree();
    if (p < 2) throw Error(ErrorKind::InvalidArgument, "degree must be at least 2");
    const int n = gp.dimension();
    if (opts.n_starts < 0) throw Error(ErrorKind::InvalidArgument, "n_starts must be nonnegative");

    double coef_scale = 0.0;
    for (const auto& t : gp.terms()) coef_scale = std::max(coef_scale, std::abs(t.coef));
    const double degeneracy = 1e-6 * coef_scale * p * p;

    std::mt19937_64 rng(opts.seed);
    std::vector<Vec> found;
    for (int s = 0; s < opts.n_starts; ++s) {
        const Vec w0 = random_unit(rng, n);
        if (auto w = newton_polish(gp, w0, opts.tol)) {
            found.push_back(*w);
            continue;
        }
        for (double sign : {1.0, -1.0}) {
            if (auto w = newton_polish(gp, projected_descent(gp, w0, sign), opts.tol)) found.push_back(*w);
        }
    }
    if (n == 1) {
        // The "sphere" is {+1, -1}; every point is critical.
        found = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    }

    const auto dedup = [&](std::vector<Vec>& pts) {
        std::sort(pts.begin(), pts.end(), lex_less);
        std::vector<Vec> uniq;
        for (const auto& w : pts) {
            const bool dup = std::any_of(uniq.begin(), uniq.end(),
                                         [&](const Vec& u) { return angle_between(u, w) < opts.dedup_angle; });
            if (!dup) uniq.push_back(w);
        }
        pts = std::move(uniq);
    };
    dedup(found);

    // Continuation through degenerate points fills in curves of critical points.
    if (n >= 2) {
        std::vector<Vec> traced;
        std::vector<Vec> seeds = found;
        for (const auto& w : seeds) {
            const bool covered = std::any_of(traced.begin(), traced.end(),
                                             [&](const Vec& u) { return angle_between(u, w) < 0.5 * opts.trace_step; });
            if (covered) continue;
            const Mat T = tangent_basis(w);
            Eigen::SelfAdjointEigenSolver<Mat> es(tangent_hessian(gp, w, T), Eigen::EigenvaluesOnly);
            if (es.eigenvalues().cwiseAbs().minCoeff() > degeneracy) continue;
            auto more = trace_orbit(gp, w, opts.trace_step, opts.tol, degeneracy);
            traced.insert(traced.end(), more.begin(), more.end());
        }
        found.insert(found.end(), traced.begin(), traced.end());
        dedup(found);
    }

    // Single-linkage clusters at three times the spacing of the starting grid.
    const double spacing = n >= 2 ? std::pow(2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n) /
                                                 std::max(1, opts.n_starts),
                                             1.0 / (n - 1))
                                   : 0.0;
    const double link = 3.0 * std::max(spacing, opts.trace_step);
    const std::size_t k = found.size();
    std::vector<int> label(k, -1);
    int n_clusters = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (label[i] >= 0) continue;
        label[i] = n_clusters;
        std::vector<std::size_t> stack{i};
        while (!stack.empty()) {
            const std::size_t a = stack.back();
            stack.pop_back();
            for (std::size_t b = 0; b < k; ++b) {
                if (label[b] < 0 && angle_between(found[a], found[b]) < link &&
                    std::abs(gp.eval(found[a]) - gp.eval(found[b])) <= 1e-6 * std::max(1.0, coef_scale)) {
                    label[b] = n_clusters;
                    stack.push_back(b);
                }
            }
        }
        ++n_clusters;
    }
    std::vector<int> size(n_clusters, 0);
    for (int l : label) ++size[l];

    std::vector<CriticalPoint> out;
    std::vector<int> orbit_remap(n_clusters, -1);
    int next_orbit = 0;
    for (std::size_t i = 0; i < k; ++i) {
        CriticalPoint cp;
        cp.direction = found[i];
        cp.value = gp.eval(found[i]);
        cp.residual = sphere_residual(gp, found[i]);
        if (size[label[i]] > opts.orbit_min_points) {
            if (orbit_remap[label[i]] < 0) orbit_remap[label[i]] = next_orbit++;
            cp.orbit_id = orbit_remap[label[i]];
        }
        out.push_back(std::move(cp));
    }
    std::stable_sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        if (a.value != b.value) return a.value < b.value;
        return lex_less(a.direction, b.direction);
    });
    return out;
}

std::vector<CriticalPoint> critical_points(const Potential& gp, int n_starts, double tol, std::uint64_t seed) {
    CriticalSearchOptions o;
    o.n_starts = n_starts;
    o.tol = tol;
    o.seed = seed;
    return critical_points(gp, o);
}

nlohmann::json to_json(const std::vector<CriticalPoint>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : pts) {
        nlohmann::json j{{"direction", std::vector<double>(c.direction.data(), c.direction.data() + c.direction.size())},
                         {"value", c.value},
                         {"residual", c.residual}};
        j["orbit_id"] = c.orbit_id ? nlohmann::json(*c.orbit_id) : nlohmann::json(nullptr);
        arr.push_back(std::move(j));
    }
    return arr;
}

std::string_view to_string(AdamsSimon v) {
    switch (v) {
    case AdamsSimon::Positive: return "Positive";
    case AdamsSimon::NonnegativeOnly: return "NonnegativeOnly";
    case AdamsSimon::Fails: return "Fails";
    }
    return "?";
}

AdamsSimonResult adams_simon(const Potential& gp, AdamsSimonMode mode, double tol, const CriticalSearchOptions& opts) {
    AdamsSimonResult r;
    if (mode.elliptic && (mode.m == 0.0 || !std::isfinite(mode.m))) {
        throw Error(ErrorKind::InvalidArgument, "elliptic mode needs a nonzero m");
    }
    if (gp.is_zero()) {
        r.diagnostic = "f constant: no nonzero homogeneous part (integrable kernel)";
        return r;
    }
    const auto pts = critical_points(gp, opts);
    if (pts.empty()) {
        r.diagnostic = "no critical points found after " + std::to_string(opts.n_starts) + " starts";
        return r;
    }
    const double scale = mode.elliptic ? 1.0 / mode.m : 1.0;
    r.best_value = -std::numeric_limits<double>::infinity();
    for (const auto& c : pts) {
        const double v = scale * c.value;
        if (v > r.best_value) {
            r.best_value = v;
            r.witness = c.direction;
        }
    }
    if (r.best_value > tol) {
        r.verdict = AdamsSimon::Positive;
    } else if (r.best_value >= -tol) {
        r.verdict = AdamsSimon::NonnegativeOnly;
    } else {
        r.verdict = AdamsSimon::Fails;
        r.diagnostic = "all critical values negative";
    }
    return r;
}

Vec ansatz_solution(const Potential& gp, const Vec& w, double t) {
    if (!gp.is_homogeneous() || gp.is_zero()) throw Error(ErrorKind::InvalidArgument, "gp must be homogeneous");
    const int p = gp.homogeneous_degree();
    if (p == 2) throw Error(ErrorKind::InvalidArgument, "p = 2 is the exponential regime; no algebraic ansatz");
    if (p < 2) throw Error(ErrorKind::InvalidArgument, "degree must be at least 3");
    if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "t must be positive");
    if (w.size() != gp.dimension()) throw Error(ErrorKind::DimensionMismatch, "w length differs from dimension");
    const Vec u = w.normalized();
    const double beta0 = gp.eval(u);
    if (!(beta0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta0 = g(w) must be positive for a decaying ansatz");
    return std::pow(beta0 * p * (p - 2) * t, -1.0 / (p - 2)) * u;
}

} // namespace thomlab
