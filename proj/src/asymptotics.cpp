#include "thomlab/asymptotics.hpp"

#include "thomlab/error.hpp"
#include "thomlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace thomlab {

namespace {

using cd = std::complex<double>;

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

LineFit line_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) throw Error(ErrorKind::InsufficientWindow, "need at least two points for a fit");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

struct Window {
    std::vector<double> t;
    std::vector<double> rho;
    std::vector<std::size_t> idx;
};

Window positive_samples(const Trajectory& tr, double t_lo) {
    Window w;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double r = tr.y[i].norm();
        if (tr.t[i] >= t_lo && tr.t[i] > 0.0 && r > 0.0 && std::isfinite(r)) {
            w.t.push_back(tr.t[i]);
            w.rho.push_back(r);
            w.idx.push_back(i);
        }
    }
    return w;
}

double first_positive_time(const Trajectory& tr) {
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (tr.t[i] > 0.0 && tr.y[i].norm() > 0.0) return tr.t[i];
    }
    return std::numeric_limits<double>::infinity();
}

// Relative RMS deviation of z = rho^{2-ell} from its best affine fit in t.
double affine_defect(const Window& w, double ell) {
    std::vector<double> z(w.t.size());
    double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = std::exp((2.0 - ell) * std::log(w.rho[i]));
        zmin = std::min(zmin, z[i]);
        zmax = std::max(zmax, z[i]);
    }
    const auto f = line_fit(w.t, z);
    return zmax > zmin ? f.rms / (zmax - zmin) : std::numeric_limits<double>::infinity();
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double angle(const Vec& a, const Vec& b) { return 2.0 * std::asin(std::min(1.0, 0.5 * (a - b).norm())); }

} // namespace

std::optional<Rational> snap_rational(double x, double rel_tol, long max_den) {
    for (long d = 1; d <= max_den; ++d) {
        const long n = std::lround(x * d);
        if (std::abs(static_cast<double>(n) / d - x) <= rel_tol * std::abs(x)) return Rational{n, d};
    }
    return std::nullopt;
}

std::optional<Rational> simplest_in(double lo, double hi, long max_den) {
    if (lo > hi) return std::nullopt;
    for (long d = 1; d <= max_den; ++d) {
        const long n = static_cast<long>(std::ceil(lo * d - 1e-12));
        if (static_cast<double>(n) / d <= hi) return Rational{n, d};
    }
    return std::nullopt;
}

Rational best_rational(double x, long max_den) {
    Rational best{std::lround(x), 1};
    double err = std::abs(best.value() - x);
    for (long d = 2; d <= max_den; ++d) {
        const long n = std::lround(x * d);
        const double e = std::abs(static_cast<double>(n) / d - x);
        if (e < err - 1e-15) {
            best = {n, d};
            err = e;
        }
    }
    return best;
}

nlohmann::json RateFit::to_json() const {
    nlohmann::json j{{"ell_star", ell_star}, {"ell_raw", ell_raw},       {"ell_loglog", ell_loglog},
                     {"alpha0", alpha0},     {"alpha0_loglog", alpha0_loglog}, {"fit_window", {t_lo, t_hi}},
                     {"residual", residual}, {"method", method}};
    j["rational"] = rational ? nlohmann::json(std::to_string(rational->num) + "/" + std::to_string(rational->den))
                             : nlohmann::json(nullptr);
    return j;
}

RateFit fit_rate(const Trajectory& traj, const FitRateOptions& opts) {
    if (traj.size() < 3) throw Error(ErrorKind::InsufficientWindow, "trajectory too short");
    const double t_hi = traj.t.back();
    if (!(t_hi > 0.0)) throw Error(ErrorKind::InsufficientWindow, "no positive times");
    const double t_lo = t_hi * std::pow(10.0, -opts.decades);
    if (first_positive_time(traj) > t_lo * (1.0 + 1e-9)) {
        throw Error(ErrorKind::InsufficientWindow, "fewer than " + std::to_string(opts.decades) +
                                                       " decades of t with nonzero samples");
    }
    const Window w = positive_samples(traj, t_lo);
    if (w.t.size() < 8) throw Error(ErrorKind::InsufficientWindow, "fewer than 8 samples in the fit window");

    std::vector<double> lt(w.t.size()), lr(w.t.size());
    for (std::size_t i = 0; i < w.t.size(); ++i) {
        lt[i] = std::log(w.t[i]);
        lr[i] = std::log(w.rho[i]);
    }
    const LineFit ll = line_fit(lt, lr);
    const LineFit lin = line_fit(w.t, lr);
    const auto not_algebraic = [&](const std::string& why) {
        return Error(ErrorKind::ExponentialTail, "tail is not algebraic: " + why + " (log-log rms " + format_double(ll.rms) +
                                                     ", log-linear rms " + format_double(lin.rms) + ")");
    };
    if (lin.rms <= ll.rms) throw not_algebraic("log |y| is closer to affine in t than in log t");
    if (!(ll.slope < 0.0)) throw Error(ErrorKind::InsufficientWindow, "no decay on the fit window");

    RateFit f;
    f.t_lo = w.t.front();
    f.t_hi = w.t.back();
    f.ell_loglog = 2.0 - 1.0 / ll.slope;

    // Refine: the exponent that makes rho^{2-ell} most nearly affine in t. Invariant
    // under time shifts, which the log-log slope is not.
    const double e0 = f.ell_loglog - 2.0;
    double lo = 2.0 + 0.5 * e0, hi = 2.0 + 2.0 * e0;
    constexpr int kGrid = 200;
    double best = lo, best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= kGrid; ++k) {
        const double ell = lo + (hi - lo) * k / kGrid;
        const double v = affine_defect(w, ell);
        if (v < best_val) {
            best_val = v;
            best = ell;
        }
    }
    double a = std::max(lo, best - (hi - lo) / kGrid), b = std::min(hi, best + (hi - lo) / kGrid);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = affine_defect(w, c), fd = affine_defect(w, d);
    for (int it = 0; it < 80; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = affine_defect(w, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = affine_defect(w, d);
        }
    }
    f.ell_raw = 0.5 * (a + b);
    // A pre-asymptotic window can bend the log-log line while |y|^{2-ell} is already affine.
    if (ll.rms > opts.algebraic_gate && affine_defect(w, f.ell_raw) > opts.affine_gate) {
        throw not_algebraic("no exponent makes |y|^(2-ell) affine in t");
    }
    f.method = "affine kappa fit of |y|^(2-ell) against t on the last " + format_double(opts.decades) + " decades";

    if (!opts.candidates.empty()) {
        double dist = std::numeric_limits<double>::infinity();
        for (const auto& r : opts.candidates) {
            const double dd = std::abs(r.value() - f.ell_raw);
            if (dd <= opts.snap_tol * f.ell_raw && dd < dist) {
                dist = dd;
                f.rational = r;
            }
        }
    } else {
        f.rational = snap_rational(f.ell_raw, opts.snap_tol, opts.max_den);
    }
    f.ell_star = f.rational ? f.rational->value() : f.ell_raw;
    if (!(f.ell_star > 2.0)) throw Error(ErrorKind::ExponentialTail, "estimated exponent does not exceed 2");

    const double ell = f.ell_star;
    std::vector<double> z(w.t.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::exp((2.0 - ell) * std::log(w.rho[i]));
    const LineFit zf = line_fit(w.t, z);
    f.alpha0 = zf.slope / (ell * (ell - 2.0));
    if (!(f.alpha0 > 0.0)) throw Error(ErrorKind::ExponentialTail, "non-positive alpha0 estimate");
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double kappa = z[i] / (f.alpha0 * ell * (ell - 2.0));
        f.residual = std::max(f.residual, std::abs(kappa / w.t[i] - 1.0));
    }
    const double cpref = w.rho.back() * std::pow(w.t.back(), 1.0 / (ell - 2.0));
    f.alpha0_loglog = std::pow(cpref, -(ell - 2.0)) / (ell * (ell - 2.0));
    return f;
}

std::string_view to_string(DecayClass::Variant v) {
    switch (v) {
    case DecayClass::Variant::Slow: return "Slow";
    case DecayClass::Variant::FastEigen: return "FastEigen";
    case DecayClass::Variant::FastOscillatory: return "FastOscillatory";
    case DecayClass::Variant::FastResonant: return "FastResonant";
    case DecayClass::Variant::Undetermined: return "Undetermined";
    }
    return "?";
}

nlohmann::json DecayClass::to_json() const {
    nlohmann::json j{{"variant", to_string(variant)}, {"rate", rate}, {"frequencies", frequencies},
                     {"matched_beta", matched_beta}, {"diagnostics", diagnostics}};
    j["direction"] = direction.size() ? vec_json(direction) : nlohmann::json(nullptr);
    j["rate_fit"] = rate_fit ? rate_fit->to_json() : nlohmann::json(nullptr);
    return j;
}

DecayClass classify_decay(const Trajectory& traj, const LinearizedSystem* sys, const FitRateOptions& opts) {
    DecayClass out;
    traj.validate();
    if (traj.size() < 4) {
        out.diagnostics["reason"] = "trajectory too short";
        return out;
    }
    try {
        out.rate_fit = fit_rate(traj, opts);
        out.variant = DecayClass::Variant::Slow;
        out.direction = traj.y.back().normalized();
        return out;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ExponentialTail && e.kind() != ErrorKind::InsufficientWindow) throw;
        out.diagnostics["rate_fit"] = e.what();
    }

    // Tail: last half of the time interval, which must be uniformly sampled.
    const double t_mid = 0.5 * (traj.t.front() + traj.t.back());
    std::vector<std::size_t> tail;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.t[i] >= t_mid) tail.push_back(i);
    }
    if (tail.size() < 6) {
        out.diagnostics["reason"] = "fewer than 6 tail samples";
        return out;
    }
    const double dt = (traj.t[tail.back()] - traj.t[tail.front()]) / (tail.size() - 1);
    for (std::size_t k = 1; k < tail.size(); ++k) {
        if (std::abs(traj.t[tail[k]] - traj.t[tail[k - 1]] - dt) > 1e-6 * dt) {
            out.diagnostics["reason"] = "exponential analysis needs uniform sampling on the tail";
            return out;
        }
    }

    const int n = traj.dimension();
    const bool hankel = !traj.has_velocity();
    const std::size_t n_snap = hankel ? tail.size() - 1 : tail.size();
    const int dim = 2 * n;
    Mat S(dim, n_snap);
    for (std::size_t k = 0; k < n_snap; ++k) {
        const std::size_t i = tail[k];
        if (hankel) {
            S.col(k) << traj.y[i], traj.y[tail[k + 1]];
        } else {
            S.col(k) << traj.y[i], traj.v[i];
        }
    }
    const Eigen::Index M = static_cast<Eigen::Index>(n_snap) - 1;
    const Mat X = S.leftCols(M);
    const Mat Y = S.rightCols(M);
    Eigen::BDCSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec sv = svd.singularValues();
    if (sv.size() == 0 || !(sv[0] > 0.0)) {
        out.diagnostics["reason"] = "tail is identically zero";
        return out;
    }
    Eigen::Index r = 0;
    while (r < sv.size() && sv[r] > 1e-10 * sv[0]) ++r;
    const Mat U = svd.matrixU().leftCols(r);
    const Mat V = svd.matrixV().leftCols(r);
    const Vec sinv = sv.head(r).cwiseInverse();
    const Mat At = U.transpose() * Y * V * sinv.asDiagonal();
    Eigen::EigenSolver<Mat> es(At);
    if (es.info() != Eigen::Success) {
        out.diagnostics["reason"] = "eigen-solver failure in mode decomposition";
        return out;
    }
    const Eigen::VectorXcd mu = es.eigenvalues();
    const Eigen::MatrixXcd Phi = (Y * V * sinv.asDiagonal()).cast<cd>() * es.eigenvectors();
    const Eigen::VectorXcd amp = Phi.colPivHouseholderQr().solve(S.col(0).cast<cd>());

    std::vector<cd> lam(r);
    for (Eigen::Index j = 0; j < r; ++j) lam[j] = std::log(mu[j]) / dt;

    // Group near-equal exponents (a Jordan block splits under round-off).
    constexpr double kCluster = 1e-2;
    std::vector<int> group(r, -1);
    int n_groups = 0;
    for (Eigen::Index j = 0; j < r; ++j) {
        if (group[j] >= 0) continue;
        group[j] = n_groups;
        for (Eigen::Index k = j + 1; k < r; ++k) {
            if (group[k] < 0 && std::abs(lam[j] - lam[k]) < kCluster * std::max(1.0, std::abs(lam[j]))) group[k] = n_groups;
        }
        ++n_groups;
    }
    std::vector<Eigen::VectorXcd> contrib(n_groups, Eigen::VectorXcd::Zero(dim));
    for (Eigen::Index j = 0; j < r; ++j) contrib[group[j]] += amp[j] * std::pow(mu[j], double(M)) * Phi.col(j);
    std::vector<double> weight(n_groups);
    for (int g = 0; g < n_groups; ++g) weight[g] = contrib[g].norm();
    const int dom = static_cast<int>(std::max_element(weight.begin(), weight.end()) - weight.begin());
    if (!(weight[dom] > 0.0)) {
        out.diagnostics["reason"] = "no mode carries the tail";
        return out;
    }
    std::vector<cd> members;
    for (Eigen::Index j = 0; j < r; ++j) {
        if (group[j] == dom) members.push_back(lam[j]);
    }
    cd mean{0.0, 0.0};
    for (const auto& l : members) mean += l;
    mean /= static_cast<double>(members.size());

    nlohmann::json spectrum = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r; ++j) spectrum.push_back({lam[j].real(), lam[j].imag()});
    out.diagnostics["exponents"] = spectrum;
    out.diagnostics["rank"] = r;
    out.diagnostics["embedding"] = hankel ? "hankel-2" : "position-velocity";

    if (!(mean.real() < 0.0)) {
        out.diagnostics["reason"] = "dominant exponent does not decay";
        out.rate = mean.real();
        return out;
    }
    const double imag_tol = 1e-6 * std::max(1.0, std::abs(mean));
    const bool oscillating = std::abs(mean.imag()) > kCluster * std::max(1.0, std::abs(mean));

    if (oscillating) {
        out.variant = DecayClass::Variant::FastOscillatory;
        out.rate = mean.real();
        for (int g = 0; g < n_groups; ++g) {
            if (weight[g] < 1e-2 * weight[dom]) continue;
            for (Eigen::Index j = 0; j < r; ++j) {
                if (group[j] != g || std::abs(lam[j].real() - mean.real()) > 1e-3 * std::max(1.0, std::abs(mean.real())))
                    continue;
                const double w = std::abs(lam[j].imag());
                if (w <= imag_tol) continue;
                const bool seen = std::any_of(out.frequencies.begin(), out.frequencies.end(),
                                              [&](double f) { return std::abs(f - w) <= 1e-6 * std::max(1.0, w); });
                if (!seen) out.frequencies.push_back(w);
            }
        }
        std::sort(out.frequencies.begin(), out.frequencies.end());
        if (sys) {
            for (double w : out.frequencies) {
                double best = std::numeric_limits<double>::quiet_NaN(), dist = std::numeric_limits<double>::infinity();
                for (double b : sys->beta) {
                    if (b > 0.0 && std::abs(b - w) < dist) {
                        dist = std::abs(b - w);
                        best = b;
                    }
                }
                out.matched_beta.push_back(best);
            }
        }
        return out;
    }

    // Real dominant exponent: decide between a pure exponential and t e^{sigma t}
    // by fitting log|y| = a + sigma t + k log t on the tail.
    if (members.size() >= 2) {
        Mat D(tail.size(), 3);
        Vec rhs(tail.size());
        Eigen::Index rows = 0;
        for (std::size_t i : tail) {
            const double rho = traj.y[i].norm();
            if (!(rho > 0.0) || !(traj.t[i] > 0.0)) continue;
            D.row(rows) << 1.0, traj.t[i], std::log(traj.t[i]);
            rhs[rows] = std::log(rho);
            ++rows;
        }
        if (rows >= 6) {
            const Vec coef = D.topRows(rows).colPivHouseholderQr().solve(rhs.head(rows));
            out.diagnostics["log_fit"] = {{"sigma", coef[1]}, {"k", coef[2]}};
            if (std::abs(coef[2] - 1.0) < 0.25) {
                out.variant = DecayClass::Variant::FastResonant;
                out.rate = coef[1];
                return out;
            }
            if (std::abs(coef[2]) >= 0.25) {
                out.diagnostics["reason"] = "repeated exponent without a clean t-prefactor";
                out.rate = mean.real();
                return out;
            }
        }
    }
    out.variant = DecayClass::Variant::FastEigen;
    out.rate = mean.real();
    Eigen::VectorXcd c = contrib[dom].head(n);
    // Remove the common phase before taking the real part.
    Eigen::Index kmax;
    c.cwiseAbs().maxCoeff(&kmax);
    const cd phase = c[kmax] / std::abs(c[kmax]);
    Vec d = (c / phase).real();
    if (d.norm() == 0.0) {
        out.variant = DecayClass::Variant::Undetermined;
        out.diagnostics["reason"] = "dominant mode has no position component";
        return out;
    }
    d.normalize();
    if (d.dot(traj.y.back()) < 0.0) d = -d;
    out.direction = d;
    const double yl = traj.y.back().norm();
    if (yl > 0.0) out.diagnostics["secant_misalignment"] = angle(traj.y.back() / yl, d);
    return out;
}

nlohmann::json SecantReport::to_json() const {
    nlohmann::json j{{"theta_star", vec_json(theta_star)}, {"tail_oscillation", tail_oscillation},
                     {"tail_start", tail_start},           {"t", t},
                     {"tail_arclength", tail_arclength},  {"sigma_ratio", sigma_ratio}};
    j["criticality_residual"] = criticality_residual ? nlohmann::json(*criticality_residual) : nlohmann::json(nullptr);
    j["value_at_theta"] = value_at_theta ? nlohmann::json(*value_at_theta) : nlohmann::json(nullptr);
    return j;
}

SecantReport secant_analysis(const Trajectory& traj, const Potential* gp, double tol) {
    traj.validate();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.y[i].norm() > 0.0) idx.push_back(i);
    }
    if (idx.size() < 3) throw Error(ErrorKind::InsufficientWindow, "need at least three nonzero samples");
    SecantReport s;
    const std::size_t k = idx.size();
    std::vector<Vec> th(k);
    for (std::size_t j = 0; j < k; ++j) th[j] = traj.y[idx[j]].normalized();
    s.theta_star = th.back();

    const double t_end = traj.t[idx.back()];
    double t_first = traj.t[idx.front()];
    for (std::size_t i : idx) {
        if (traj.t[i] > 0.0) {
            t_first = traj.t[i];
            break;
        }
    }
    s.tail_start = (t_first > 0.0 && t_end / t_first >= 100.0) ? t_end / 10.0 : 0.5 * (t_first + t_end);

    s.t.resize(k);
    s.tail_arclength.assign(k, 0.0);
    s.sigma_ratio.assign(k, 0.0);
    double arc = 0.0, path = traj.y[idx.back()].norm();
    for (std::size_t j = k; j-- > 0;) {
        s.t[j] = traj.t[idx[j]];
        if (j + 1 < k) {
            arc += (th[j + 1] - th[j]).norm();
            path += (traj.y[idx[j + 1]] - traj.y[idx[j]]).norm();
        }
        s.tail_arclength[j] = arc;
        s.sigma_ratio[j] = path / traj.y[idx[j]].norm();
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (s.t[j] >= s.tail_start) s.tail_oscillation = std::max(s.tail_oscillation, angle(th[j], s.theta_star));
    }
    if (gp) {
        s.criticality_residual = gp->spherical_gradient(s.theta_star).norm();
        s.value_at_theta = gp->eval(s.theta_star);
    }
    if (s.tail_oscillation > tol) {
        throw Error(ErrorKind::NonConvergentSecant,
                    "secant oscillates by " + std::to_string(s.tail_oscillation) + " rad on the tail (tol " +
                        std::to_string(tol) + ")");
    }
    return s;
}

RegionMembership region_membership(const Potential& g, const Vec& y, const RegionParams& p) {
    RegionMembership m;
    const double r = y.norm();
    if (r == 0.0) throw Error(ErrorKind::InvalidArgument, "region membership undefined at y = 0");
    const double gv = g.eval(y);
    if (r > p.r || gv == 0.0) return m;
    const double dr = g.radial_derivative(y);
    const double sg = g.spherical_gradient(y).norm();
    m.in_W = p.epsilon * sg <= std::abs(dr);
    if (m.in_W && dr != 0.0) {
        m.in_W4 = std::abs(1.0 - p.q * gv / (r * dr)) <= 0.5 * std::pow(r, 2.0 * p.omega);
    }
    return m;
}

nlohmann::json ExponentReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : exponents) {
        arr.push_back({{"q", e.q},
                       {"rational", std::to_string(e.rational.num) + "/" + std::to_string(e.rational.den)},
                       {"raw", e.raw},
                       {"support_fraction", e.support_fraction}});
    }
    return {{"exponents", arr}, {"in_region", in_region}, {"unassigned_fraction", unassigned_fraction},
            {"overlaps", overlaps}};
}

ExponentReport characteristic_exponents(const Potential& g, const ExponentSampling& s) {
    g.homogeneous_components();
    if (!(s.r > 0.0) || s.n_samples <= 0) throw Error(ErrorKind::InvalidArgument, "bad sampling parameters");
    const int n = g.dimension();
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto random_unit = [&]() {
        Vec v(n);
        do {
            for (int i = 0; i < n; ++i) v[i] = gauss(rng);
        } while (v.norm() < 1e-12);
        return Vec(v.normalized());
    };

    std::vector<Vec> pts;
    std::vector<double> qs;
    const RegionParams wp{s.epsilon, s.r, s.omega, 1.0};
    for (int i = 0; i < s.n_samples; ++i) {
        Vec w;
        if (n >= 2 && unif(rng) < s.axis_fraction) {
            // Near a coordinate axis, at a log-uniform angle in [1e-8, pi/2].
            const int axis = static_cast<int>(rng() % n);
            Vec e = Vec::Zero(n);
            e[axis] = unif(rng) < 0.5 ? 1.0 : -1.0;
            Vec u = random_unit();
            u -= u.dot(e) * e;
            if (u.norm() < 1e-12) continue;
            u.normalize();
            const double a = 0.5 * std::numbers::pi * std::pow(10.0, -8.0 * unif(rng));
            w = std::cos(a) * e + std::sin(a) * u;
        } else {
            w = random_unit();
        }
        const Vec y = s.r * std::pow(10.0, -2.0 * unif(rng)) * w;
        if (!region_membership(g, y, wp).in_W) continue;
        pts.push_back(y);
        qs.push_back(y.norm() * g.radial_derivative(y) / g.eval(y));
    }
    if (pts.empty()) throw Error(ErrorKind::EmptyRegion, "no sampled point lies in W(epsilon, r)");

    ExponentReport rep;
    rep.in_region = static_cast<int>(pts.size());
    std::vector<double> sorted = qs;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t N = sorted.size();
    const double need = s.min_share * static_cast<double>(N);
    // Density cores: samples with at least min_share of all samples within a 0.5% window.
    std::vector<bool> core(N, false);
    for (std::size_t i = 0; i < N; ++i) {
        const double h = 0.005 * std::max(1.0, std::abs(sorted[i]));
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), sorted[i] - h);
        const auto hi = std::upper_bound(sorted.begin(), sorted.end(), sorted[i] + h);
        core[i] = static_cast<double>(hi - lo) >= std::max(1.0, need);
    }
    std::vector<std::pair<std::size_t, std::size_t>> clusters;
    for (std::size_t i = 0; i < N; ++i) {
        if (!core[i]) continue;
        const double h = 0.005 * std::max(1.0, std::abs(sorted[i]));
        if (!clusters.empty() && sorted[i] - sorted[clusters.back().second] <= h) {
            clusters.back().second = i;
        } else {
            clusters.push_back({i, i});
        }
    }
    for (const auto& [a, b] : clusters) {
        const std::size_t len = b - a + 1;
        const double qlo = sorted[a + len / 10];
        const double qhi = sorted[a + (9 * len) / 10 - (len >= 10 ? 1 : 0)];
        const double med = sorted[a + len / 2];
        CharacteristicExponent e;
        e.raw = med;
        const auto simple = simplest_in(qlo - 1e-9, qhi + 1e-9);
        e.rational = simple ? *simple : best_rational(med);
        e.q = e.rational.value();
        if (!rep.exponents.empty() && rep.exponents.back().rational == e.rational) continue;
        rep.exponents.push_back(e);
    }

    long unassigned = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        int hits = 0;
        for (auto& e : rep.exponents) {
            const RegionParams p{s.epsilon, s.r, s.omega, e.q};
            if (region_membership(g, pts[i], p).in_W4) {
                ++hits;
                e.support_fraction += 1.0;
            }
        }
        if (hits == 0) ++unassigned;
        if (hits > 1) ++rep.overlaps;
    }
    for (auto& e : rep.exponents) e.support_fraction /= static_cast<double>(pts.size());
    rep.unassigned_fraction = static_cast<double>(unassigned) / static_cast<double>(pts.size());
    return rep;
}

nlohmann::json GstarReport::to_json() const {
    return {{"t", t},           {"gstar", gstar}, {"h", h}, {"alpha0", alpha0}, {"burn_in_t", burn_in_t},
            {"monotone_violations", monotone_violations}};
}

GstarReport monitor_gstar(const Trajectory& traj, const Potential& g, double ell_star, double omega_star,
                          std::optional<double> alpha0, double burn_in_decades, double slack) {
    traj.validate();
    GstarReport rep;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.y[i].norm() == 0.0) continue;
        rep.t.push_back(traj.t[i]);
        rep.gstar.push_back(g.normalized_value(traj.y[i], ell_star));
    }
    if (rep.t.empty()) throw Error(ErrorKind::InsufficientWindow, "no nonzero samples");
    double t_first = rep.t.front();
    for (double t : rep.t) {
        if (t > 0.0) {
            t_first = t;
            break;
        }
    }
    rep.burn_in_t = t_first * std::pow(10.0, burn_in_decades);
    if (alpha0) {
        rep.alpha0 = *alpha0;
    } else {
        // Tail average over the last decade of t.
        const double t_tail = rep.t.back() / 10.0;
        double sum = 0.0;
        int cnt = 0;
        for (std::size_t i = 0; i < rep.t.size(); ++i) {
            if (rep.t[i] >= t_tail) {
                sum += rep.gstar[i];
                ++cnt;
            }
        }
        rep.alpha0 = sum / cnt;
    }
    std::size_t j = 0;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double r = traj.y[i].norm();
        if (r == 0.0) continue;
        rep.h.push_back((rep.gstar[j] - rep.alpha0) + std::pow(r, 0.5 * omega_star));
        const double lyap = rep.gstar[j] + std::pow(r, omega_star);
        if (rep.t[j] >= rep.burn_in_t && std::isfinite(prev) && lyap - prev > slack) ++rep.monotone_violations;
        if (rep.t[j] >= rep.burn_in_t) prev = lyap;
        ++j;
    }
    return rep;
}

std::string_view to_string(MzOutcome o) {
    switch (o) {
    case MzOutcome::Neutral: return "Neutral";
    case MzOutcome::StableDominated: return "StableDominated";
    case MzOutcome::Violated: return "Violated";
    }
    return "?";
}

nlohmann::json MzResult::to_json() const {
    return {{"outcome", to_string(outcome)}, {"neutral_ratio", neutral_ratio}, {"stable_ratio", stable_ratio},
            {"rate", rate}, {"bound_rate", bound_rate}, {"t_lo", t_lo}};
}

MzResult mz_trichotomy(const std::vector<double>& t, const std::vector<double>& Xp, const std::vector<double>& X0,
                       const std::vector<double>& Xm, double b, double threshold) {
    const std::size_t n = t.size();
    if (Xp.size() != n || X0.size() != n || Xm.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "series must share the time grid");
    }
    if (n < 2) throw Error(ErrorKind::InsufficientWindow, "need at least two samples");
    if (!(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "b must be positive");
    MzResult res;
    res.bound_rate = -b;
    // "Tail": the last decade of t when available, else the last half of the interval.
    const double t_end = t.back();
    res.t_lo = (t.front() > 0.0 && t_end / t.front() >= 10.0) || (t.front() <= 0.0 && t_end > 0.0 && t_end / 10.0 > t.front())
                   ? t_end / 10.0
                   : 0.5 * (t.front() + t_end);
    std::vector<double> tt, ls;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (t[i] < res.t_lo) continue;
        const double nr = X0[i] > 0.0 ? (Xp[i] + Xm[i]) / X0[i] : inf;
        const double sr = Xm[i] > 0.0 ? (Xp[i] + X0[i]) / Xm[i] : inf;
        res.neutral_ratio = std::max(res.neutral_ratio, nr);
        res.stable_ratio = std::max(res.stable_ratio, sr);
        const double sum = Xp[i] + X0[i] + Xm[i];
        if (sum > 0.0) {
            tt.push_back(t[i]);
            ls.push_back(std::log(sum));
        }
    }
    if (tt.size() >= 2) res.rate = line_fit(tt, ls).slope;
    if (res.neutral_ratio < threshold) {
        res.outcome = MzOutcome::Neutral;
    } else if (res.stable_ratio < threshold) {
        res.outcome = MzOutcome::StableDominated;
    } else {
        res.outcome = MzOutcome::Violated;
    }
    return res;
}

nlohmann::json A1A2Report::to_json() const {
    return {{"D1", D1},     {"D2", D2},     {"alpha2", alpha2}, {"bN_min", bN_min}, {"fit_window", {t_lo, t_hi}},
            {"pass", pass}, {"velocity_source", velocity_source}};
}

A1A2Report verify_A1_A2(const Trajectory& traj, const Potential& g, double rho, int N) {
    traj.validate();
    if (traj.dimension() != g.dimension()) throw Error(ErrorKind::DimensionMismatch, "trajectory/potential dimension");
    if (traj.size() < 3 || !(traj.t.back() > 0.0)) throw Error(ErrorKind::RequiresTail, "trajectory too short");
    const double t_hi = traj.t.back();
    const double t_lo = std::max({1.0, t_hi / 100.0, traj.t.front()});
    if (t_hi / t_lo < 10.0) throw Error(ErrorKind::RequiresTail, "need at least one decade of t >= 1");

    A1A2Report rep;
    rep.t_lo = t_lo;
    rep.t_hi = t_hi;
    rep.velocity_source = traj.has_velocity() ? "stored" : "finite-difference";
    std::vector<double> lt, lr;
    rep.D1 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.t[i] < t_lo) continue;
        const double r = traj.y[i].norm();
        rep.D1 = std::min(rep.D1, traj.t[i] * r);
        if (r > 0.0) {
            lt.push_back(std::log(traj.t[i]));
            lr.push_back(std::log(r));
        }
        Vec v;
        if (traj.has_velocity()) {
            v = traj.v[i];
        } else if (i > 0 && i + 1 < traj.size()) {
            const double t0 = traj.t[i - 1], t1 = traj.t[i], t2 = traj.t[i + 1];
            v = traj.y[i - 1] * (t1 - t2) / ((t0 - t1) * (t0 - t2)) +
                traj.y[i] * (2 * t1 - t0 - t2) / ((t1 - t0) * (t1 - t2)) +
                traj.y[i + 1] * (t1 - t0) / ((t2 - t0) * (t2 - t1));
        } else {
            continue;
        }
        const Vec grad = g.grad(traj.y[i]);
        const double denom = std::pow(r, rho) * grad.norm() + std::pow(r, N);
        if (denom > 0.0) rep.bN_min = std::max(rep.bN_min, (v + grad).norm() / denom);
    }
    if (lt.size() < 5) throw Error(ErrorKind::RequiresTail, "too few nonzero samples on the tail");
    rep.alpha2 = std::clamp(-line_fit(lt, lr).slope, 0.0, 1.0);
    rep.D2 = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) rep.D2 = std::max(rep.D2, std::exp(lr[i] + rep.alpha2 * lt[i]));
    rep.pass = std::isfinite(rep.D1) && rep.D1 > 0.0 && std::isfinite(rep.D2) && rep.alpha2 > 0.0 &&
               std::isfinite(rep.bN_min);
    return rep;
}

} // namespace thomlab
