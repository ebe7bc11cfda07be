// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "thomlab/asymptotics.hpp"
#include "thomlab/error.hpp"
#include "thomlab/flow.hpp"
#include "thomlab/linearized.hpp"
#include "thomlab/pde_spectral.hpp"
#include "thomlab/reduction.hpp"
#include "thomlab/sphere_critical.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace thomlab;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Collects sub-checks of one criterion into a verdict and a short detail line.
class Verdict {
public:
    void check(bool ok, const std::string& what) {
        pass_ = pass_ && ok;
        if (!detail_.empty()) detail_ += "; ";
        detail_ += (ok ? "" : "FAILED ") + what;
    }
    bool pass() const { return pass_; }
    const std::string& detail() const { return detail_; }

private:
    bool pass_ = true;
    std::string detail_;
};

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

// Shared by criteria 2/3 and 4/6/10.
struct Shared {
    std::optional<Trajectory> bubble;
    std::optional<Trajectory> quartic;
    std::optional<SlowDecayReport> slow;
};

const Potential& neg_bubble() {
    static const Potential g = -Potential::bubble_sheet();
    return g;
}

const Potential& quartic() {
    static const Potential g = Potential::norm_power(2, 2, 0.25);
    return g;
}

const Trajectory& bubble_run(Shared& s) {
    // Decaying solutions live in the invariant plane x3 = 0: the limit direction is a saddle of the
    // restriction to the sphere, unstable along x3.
    if (!s.bubble) s.bubble = integrate_gradient(neg_bubble(), vec({-0.0356, -0.0351, 0.0}), 0.0, 1e7);
    return *s.bubble;
}

const Trajectory& quartic_run(Shared& s) {
    if (!s.quartic) s.quartic = integrate_gradient(quartic(), vec({0.31, -0.17}), 0.0, 1e5);
    return *s.quartic;
}

const SlowDecayReport& slow_run(Shared& s) {
    if (!s.slow) {
        PdeOptions o;
        o.t_end = 1e4;
        s.slow = slow_decay_report(0.1, 0.0, PdeModel::cubic(), o);
    }
    return *s.slow;
}

void ansatz(Verdict& v, Shared&) {
    struct Case {
        Potential g;
        Vec w;
    };
    // Both have w = e1 as a critical direction on the sphere with g(w) = 1/2 and 1/4.
    const std::vector<Case> cases{{Potential(2, {Term{{3, 0}, 0.5}, Term{{1, 2}, 1.0}}), vec({1, 0})},
                                  {Potential(3, {Term{{4, 0, 0}, 0.25}, Term{{2, 2, 0}, 1.0}, Term{{0, 0, 4}, 0.5}}),
                                   vec({1, 0, 0})}};
    for (const auto& c : cases) {
        const auto start = std::chrono::steady_clock::now();
        const double t0 = 10.0;
        const auto tr = integrate_gradient(c.g, ansatz_solution(c.g, c.w, t0), t0, 1e4);
        double worst = 0.0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const Vec exact = ansatz_solution(c.g, c.w, tr.t[i]);
            worst = std::max(worst, (tr.y[i] - exact).norm() / exact.norm());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const int p = c.g.homogeneous_degree();
        v.check(worst <= 1e-6 && tr.t.back() == 1e4, "p=" + std::to_string(p) + fmt(" max rel dev %.2e", worst));
        v.check(secs < 10.0, fmt("%.2fs", secs));
    }
}

void rate(Verdict& v, Shared& s) {
    const auto start = std::chrono::steady_clock::now();
    const auto fb = fit_rate(bubble_run(s));
    v.check(fb.ell_star == 3.0 && rel(fb.alpha0, 4.0 * std::sqrt(2.0) / 3.0) <= 0.02,
            fmt("bubble ell*=%g alpha0=%.6f", fb.ell_star, fb.alpha0));
    const auto fq = fit_rate(quartic_run(s));
    v.check(fq.ell_star == 4.0 && rel(fq.alpha0, 0.25) <= 0.02, fmt("quartic ell*=%g alpha0=%.6f", fq.ell_star, fq.alpha0));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.check(secs < 60.0, fmt("%.1fs", secs));
}

void secant(Verdict& v, Shared& s) {
    const std::pair<const Trajectory*, const Potential*> runs[] = {{&bubble_run(s), &neg_bubble()},
                                                                   {&quartic_run(s), &quartic()}};
    const char* names[] = {"bubble", "quartic"};
    for (int i = 0; i < 2; ++i) {
        const auto rep = secant_analysis(*runs[i].first, runs[i].second);
        // Remaining path length of the secant from the start of the last decade.
        double arc = 0.0;
        for (std::size_t j = 0; j < rep.t.size(); ++j) {
            if (rep.t[j] >= rep.tail_start) {
                arc = rep.tail_arclength[j];
                break;
            }
        }
        v.check(arc < 1e-4, std::string(names[i]) + fmt(" tail arclength %.2e from t=%g", arc, rep.tail_start));
        v.check(*rep.criticality_residual < 1e-6 && *rep.value_at_theta >= -1e-9,
                std::string(names[i]) + fmt(" |grad'|=%.2e value=%.6f", *rep.criticality_residual, *rep.value_at_theta));
    }
}

void pde_slow(Verdict& v, Shared& s) {
    const auto start = std::chrono::steady_clock::now();
    const auto& rep = slow_run(s);
    const double target = std::sqrt(2.0 * kPi / 3.0);
    v.check(rep.run.status == PdeStatus::Completed && rel(rep.sqrt_t_norm_final, target) <= 0.05,
            fmt("sqrt(t)|u| = %.5f vs %.5f", rep.sqrt_t_norm_final, target));
    PdeOptions fine;
    fine.t_end = 1e4;
    fine.K = 128;
    fine.dt = 0.5e-3;
    const auto rf = slow_decay_report(0.1, 0.0, PdeModel::cubic(), fine);
    const double drift = rel(rf.sqrt_t_norm_final, rep.sqrt_t_norm_final);
    v.check(drift <= 1e-3, fmt("K=128, dt/2 shift %.2e", drift));
    const auto a = fit_rate(rep.run.neutral());
    const auto b = fit_rate(rf.run.neutral());
    v.check(rel(b.alpha0, a.alpha0) <= 1e-3 && a.ell_star == b.ell_star, fmt("alpha0 %.6f vs %.6f", a.alpha0, b.alpha0));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.check(secs < 300.0, fmt("%.1fs", secs));
}

void pde_fast(Verdict& v, Shared&) {
    SpectralState u(64);
    u.c[2] = 0.025;  // 0.05 cos(2 theta)
    PdeOptions o;
    o.t_end = 8;
    o.sample_dt = 0.05;
    const auto run = evolve(u, PdeModel::cubic(), o);
    const auto c = classify_decay(run.modes());
    Vec e = Vec::Zero(c.direction.size() ? c.direction.size() : 1);
    if (e.size() > 3) e[3] = 1.0;
    const double res = c.direction.size() == e.size() ? (c.direction - e).norm() : 1.0;
    v.check(c.variant == DecayClass::Variant::FastEigen, std::string(to_string(c.variant)));
    v.check(rel(c.rate, -3.0) <= 0.02, fmt("rate %.6f", c.rate));
    v.check(res < 1e-6, fmt("direction residual %.2e", res));
}

void neutral_dominance(Verdict& v, Shared& s) {
    const auto& run = slow_run(s).run;
    const auto mz = mz_trichotomy(run.t, run.Xplus, run.Xzero, run.Xminus, 3.0);
    v.check(mz.outcome == MzOutcome::Neutral, std::string("PDE run ") + std::string(to_string(mz.outcome)) +
                                                  fmt(" ratio %.2e", mz.neutral_ratio));
    for (double b : {0.5, 2.0}) {
        std::vector<double> t, xp, x0, xm;
        for (int i = 0; i <= 400; ++i) {
            t.push_back(0.05 * i);
            xp.push_back(1e-3 * std::exp(-2.0 * b * t.back()));
            x0.push_back(1e-2 * std::exp(-1.5 * b * t.back()));
            xm.push_back(std::exp(-b * t.back()) * (1.0 + 0.1 * std::exp(-t.back())));
        }
        const auto r = mz_trichotomy(t, xp, x0, xm, b);
        v.check(r.outcome == MzOutcome::StableDominated && rel(r.rate, -b) <= 0.05,
                std::string("synthetic ") + std::string(to_string(r.outcome)) + fmt(" rate %.4f vs %.4f", r.rate, -b));
    }
}

void elliptic_fast(Verdict& v, Shared&) {
    const double m = -1.0;
    FlowOptions o;
    o.ode.uniform_dt = 0.05;
    o.validity_radius = 1.0;
    const auto run = [&](double lam, double y0, double v0) {
        return integrate_heavy_ball(Potential::diagonal_quadratic({-lam}), m, vec({y0}), vec({v0}), 0.0, 40.0, o);
    };
    {
        const double lam = 1.0;
        Mat A(1, 1);
        A << lam;
        const auto sys = vectorize(A, m);
        const auto c = classify_decay(run(lam, 0.1, 0.0), &sys);
        const double beta = std::sqrt(lam - m * m / 4);
        const bool ok = c.variant == DecayClass::Variant::FastOscillatory && c.frequencies.size() == 1 &&
                        std::abs(c.rate - m / 2) <= 1e-4 && std::abs(c.frequencies[0] - beta) <= 1e-4;
        v.check(ok, std::string("lambda=1 ") + std::string(to_string(c.variant)) +
                        fmt(" rate %.6f freq %.6f", c.rate, c.frequencies.empty() ? 0.0 : c.frequencies[0]));
    }
    {
        const auto c = classify_decay(run(0.25, 0.0, 0.1));
        v.check(c.variant == DecayClass::Variant::FastResonant && std::abs(c.rate - m / 2) <= 1e-4,
                std::string("lambda=1/4 ") + std::string(to_string(c.variant)) + fmt(" rate %.6f", c.rate));
    }
    {
        const double lam = 0.1;
        const double gamma = (m + std::sqrt(m * m - 4 * lam)) / 2;
        const auto c = classify_decay(run(lam, 0.1, 0.0));
        v.check(c.variant == DecayClass::Variant::FastEigen && std::abs(c.rate - gamma) <= 1e-4,
                std::string("lambda=1/10 ") + std::string(to_string(c.variant)) + fmt(" rate %.6f vs %.6f", c.rate, gamma));
    }
}

void heavy_ball(Verdict& v, Shared&) {
    const auto f = -Potential::norm_power(2, 2, 0.25);
    const auto tr = integrate_heavy_ball(f, -1.0, vec({0.1, 0.05}), vec({0, 0}), 0.0, 1e5);
    const double lim = tr.y.back().norm() * std::sqrt(2.0 * tr.t.back());
    v.check(std::abs(lim - 1.0) <= 0.02, fmt("|y|sqrt(2t) = %.5f at t=%g", lim, tr.t.back()));
    std::string alphas;
    bool ok = true;
    for (double m : {-0.5, -1.0, -2.0}) {
        const auto fit = fit_rate(integrate_heavy_ball(f, m, vec({0.1, 0.05}), vec({0, 0}), 0.0, 1e5));
        ok = ok && fit.ell_star == 4.0 && rel(fit.alpha0 * std::abs(m), 0.25) <= 0.02;
        alphas += fmt(" m=%g:%.5f", m, fit.alpha0);
    }
    v.check(ok, "alpha0 |m| = 1/4:" + alphas);
}

void vectorization(Verdict& v, Shared&) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> dim(1, 8);
    double worst = 0.0, gmin = 1e300;
    int cases = 0;
    bool partition = true;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = dim(rng);
        Mat a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
        Mat A = 0.5 * (a + a.transpose());
        if (trial % 4 == 0 && n >= 3) {
            // Plant the kernel and the repeated-root values so every index set is exercised.
            Eigen::SelfAdjointEigenSolver<Mat> es(A);
            Vec d = es.eigenvalues();
            d[0] = 0.0;
            d[1] = 0.25;
            d[2] = 1.0;
            A = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
            A = 0.5 * (A + A.transpose());
        }
        for (double m : {-1.0, 1.0, -2.0, 2.0}) {
            const auto sys = vectorize(A, m);
            const auto c = check_vectorization(sys);
            std::size_t total = 0;
            for (auto set : {IndexSet::I1, IndexSet::I2, IndexSet::I3, IndexSet::I4}) total += sys.indices(set).size();
            partition = partition && total == static_cast<std::size_t>(n) && sys.psi.size() == 2 * total;
            worst = std::max({worst, c.gram_identity, c.l_action, c.adjoint_action});
            gmin = std::min(gmin, c.g_positive_min);
            ++cases;
        }
    }
    v.check(worst <= 1e-10, std::to_string(cases) + fmt(" cases, max residual %.2e", worst));
    v.check(partition && gmin > 0.0, fmt("index sets partition, min eig G %.2e", gmin));
}

void lyapunov_schmidt(Verdict& v, Shared& s) {
    const ReducedModel rm(PdeModel::cubic());
    const Vec zero = Vec::Zero(2);
    v.check(rm.solve_H(zero).norm() == 0.0, "H(0)=0");
    double dh = 0.0;
    const double h = 1e-4;
    for (int i = 0; i < 2; ++i) {
        Vec e = Vec::Zero(2);
        e[i] = h;
        dh = std::max(dh, (rm.solve_H(e) - rm.solve_H(-e)).norm() / (2 * h));
    }
    v.check(dh <= 1e-8, fmt("|DH(0)| by differences %.2e", dh));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        Vec x = vec({u(rng), u(rng)});
        x *= (0.02 + 0.2 * std::abs(u(rng))) / x.norm();
        const Vec d = vec({u(rng), u(rng)}).normalized();
        const double step = 1e-4 * x.norm();
        const double fd = (rm.reduced_value(x + step * d) - rm.reduced_value(x - step * d)) / (2 * step);
        const Vec g = rm.reduced_gradient(x);
        worst = std::max(worst, std::abs(fd - g.dot(d)) / g.norm());
    }
    v.check(worst <= 1e-6, fmt("gradient vs differences %.2e", worst));

    const auto fit = fit_reduced_polynomial(rm);
    const double c4 = 3.0 / (16.0 * kPi);
    const double lead = fit.p ? fit.f_p.eval(vec({1, 0})) : 0.0;
    v.check(fit.p == 4 && rel(lead, c4) <= 0.01, fmt("p=%g, leading coefficient %.6f", fit.p.value_or(0), lead) +
                                                   fmt(" vs %.6f", c4));
    // The reduced flow is the gradient flow of f_4 = c|x|^4, whose rate constant is c.
    const auto fr = fit_rate(slow_run(s).run.neutral());
    v.check(rel(fr.alpha0, lead) <= 0.02, fmt("PDE alpha0 %.6f vs reduced %.6f", fr.alpha0, lead));
}

void adams_simon_necessity(Verdict& v, Shared&) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1, 1);
    int exited = 0, fast = 0;
    for (int i = 0; i < 10; ++i) {
        SpectralState init(64);
        // Alternate odd data with data supported on k = 2 mod 4; both sets are closed under the cubic.
        const std::vector<int> ks = i % 2 == 0 ? std::vector<int>{1, 3, 5} : std::vector<int>{2, 6};
        for (int k : ks) init.c[k] = {0.03 * u(rng), 0.03 * u(rng)};
        PdeOptions o;
        o.t_end = 1e5;
        const auto run = evolve(init, PdeModel::sign_flipped(), o);
        if (run.status == PdeStatus::ExitedBall) {
            ++exited;
            continue;
        }
        PdeOptions us;
        us.t_end = 8;
        us.sample_dt = 0.05;
        const auto c = classify_decay(evolve(init, PdeModel::sign_flipped(), us).modes());
        const bool eig = c.variant == DecayClass::Variant::FastEigen && c.rate < 0.0;
        fast += eig;
        if (!eig) v.check(false, "run " + std::to_string(i) + " " + std::string(to_string(c.variant)));
    }
    v.check(exited + fast == 10, std::to_string(exited) + " exited the ball, " + std::to_string(fast) + " FastEigen");
    const auto as = adams_simon_from_reduction(fit_reduced_polynomial(ReducedModel(PdeModel::sign_flipped())));
    v.check(as.verdict == AdamsSimon::Fails, "Adams-Simon " + std::string(to_string(as.verdict)));
}

void exponents(Verdict& v, Shared&) {
    const std::vector<std::pair<Potential, int>> homogeneous{
        {Potential(2, {Term{{3, 0}, 1.0}, Term{{1, 2}, 1.0}}), 3},
        {Potential::norm_power(2, 2, 0.25), 4},
        {Potential(3, {Term{{4, 0, 0}, 1.0}, Term{{0, 2, 2}, 2.0}, Term{{0, 0, 4}, 0.5}}), 4}};
    for (const auto& [g, p] : homogeneous) {
        ExponentSampling s;
        s.n_samples = 4000;
        const auto rep = characteristic_exponents(g, s);
        const bool ok = rep.exponents.size() == 1 && rep.exponents[0].rational == Rational{p, 1};
        std::string got;
        for (const auto& e : rep.exponents) got += fmt(" %g", e.q);
        v.check(ok, "p=" + std::to_string(p) + " ->" + got);
    }
    ExponentSampling s;
    s.r = 1e-4;
    s.omega = 0.1;
    const auto rep = characteristic_exponents(Potential(2, {Term{{4, 0}, 1.0}, Term{{0, 6}, 1.0}}), s);
    const bool ok = rep.exponents.size() == 2 && rep.exponents[0].rational == Rational{4, 1} &&
                    rep.exponents[1].rational == Rational{6, 1};
    std::string got;
    for (const auto& e : rep.exponents) got += fmt(" %g", e.q);
    v.check(ok, "y1^4+y2^6 ->" + got);
    v.check(rep.overlaps == 0, "band overlaps " + std::to_string(rep.overlaps));
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void(Verdict&, Shared&)>>> criteria{
        {"ansatz exactness", ansatz},
        {"rate theorem", rate},
        {"secant convergence", secant},
        {"PDE slow decay", pde_slow},
        {"PDE fast decay", pde_fast},
        {"neutral dominance", neutral_dominance},
        {"elliptic fast-decay alternatives", elliptic_fast},
        {"heavy-ball slow decay", heavy_ball},
        {"vectorization", vectorization},
        {"Lyapunov-Schmidt reduction", lyapunov_schmidt},
        {"Adams-Simon necessity", adams_simon_necessity},
        {"characteristic exponents", exponents},
    };
    Shared shared;
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            criteria[i].second(v, shared);
        } catch (const std::exception& e) {
            v.check(false, std::string("error: ") + e.what());
        }
        failed += !v.pass();
        std::printf("%s %2zu %s: %s\n", v.pass() ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail().c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
