#include "thomlab/ode.hpp"

#include "thomlab/error.hpp"

#include <algorithm>
#include <cmath>

namespace thomlab {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct Stepper {
    const OdeRhs& f;
    const OdeControl& ctrl;
    Vec k1, k2, k3, k4, k5, k6, k7, tmp, ynew;
    bool fsal_valid = false;
    long steps = 0;
    long rejected = 0;

    Stepper(const OdeRhs& rhs, const OdeControl& c, Eigen::Index n)
        : f(rhs), ctrl(c), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n) {}

    double initial_step(double x, const Vec& y, double x_end) {
        f(x, y, k1);
        fsal_valid = true;
        const Vec sc = ctrl.atol + ctrl.rtol * y.array().abs();
        const double d0 = (y.array() / sc.array()).matrix().norm() / std::sqrt(double(y.size()));
        const double d1 = (k1.array() / sc.array()).matrix().norm() / std::sqrt(double(y.size()));
        double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        return std::min(h, std::abs(x_end - x));
    }

    // Advance (x, y) to x_end in the variable x; h is carried in and out.
    void advance(double& x, Vec& y, double x_end, double& h, const std::function<double(double)>& to_time,
                 const StepObserver& observer) {
        const double dir = x_end >= x ? 1.0 : -1.0;
        if (!fsal_valid) f(x, y, k1);
        fsal_valid = true;
        while (dir * (x_end - x) > 0.0) {
            if (steps >= ctrl.max_steps) {
                throw Error(ErrorKind::StiffnessFailure, "maximum step count exhausted at t=" +
                                                             std::to_string(to_time(x)));
            }
            bool last = false;
            double step = std::min(std::abs(h), std::abs(x_end - x));
            if (std::abs(x_end - x) <= std::abs(h) * (1.0 + 1e-12)) {
                step = std::abs(x_end - x);
                last = true;
            }
            const double hs = dir * step;
            const double tiny = 1e-14 * std::max(1.0, std::abs(x));
            if (step < tiny && !last) {
                throw Error(ErrorKind::StiffnessFailure, "step size underflow at t=" + std::to_string(to_time(x)));
            }
            tmp = y + hs * (a21 * k1);
            f(x + c2 * hs, tmp, k2);
            tmp = y + hs * (a31 * k1 + a32 * k2);
            f(x + c3 * hs, tmp, k3);
            tmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
            f(x + c4 * hs, tmp, k4);
            tmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            f(x + c5 * hs, tmp, k5);
            tmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            const double xn = last ? x_end : x + hs;
            f(xn, tmp, k6);
            ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            f(xn, ynew, k7);
            const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const Vec sc = ctrl.atol + ctrl.rtol * y.array().abs().max(ynew.array().abs());
            const double en = (err.array() / sc.array()).matrix().norm() / std::sqrt(double(y.size()));
            if (!std::isfinite(en)) {
                h = 0.2 * hs;
                ++rejected;
                if (std::abs(h) < tiny) {
                    throw Error(ErrorKind::StiffnessFailure,
                                "non-finite derivative at t=" + std::to_string(to_time(x)));
                }
                continue;
            }
            ++steps;
            if (en <= 1.0) {
                x = xn;
                y = ynew;
                k1 = k7;
                if (observer) observer(to_time(x), y);
                const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
                // A step shortened to hit the interval end says little about the next one.
                const double proposed = step * fac;
                h = dir * (last ? std::max(std::abs(h), proposed) : proposed);
            } else {
                ++rejected;
                h = hs * std::clamp(0.9 * std::pow(en, -0.2), 0.1, 1.0);
            }
        }
    }
};

} // namespace

std::vector<double> output_grid(double t0, double t1, const OdeControl& ctrl) {
    std::vector<double> grid{t0};
    if (t1 == t0) return grid;
    if (ctrl.uniform_dt > 0.0) {
        const double dir = t1 > t0 ? 1.0 : -1.0;
        const long n = static_cast<long>(std::floor(std::abs(t1 - t0) / ctrl.uniform_dt + 1e-9));
        for (long k = 1; k <= n; ++k) grid.push_back(t0 + dir * k * ctrl.uniform_dt);
    } else if (t1 < t0 || t0 < 0.0) {
        constexpr int n = 200;
        for (int k = 1; k < n; ++k) grid.push_back(t0 + (t1 - t0) * k / n);
    } else {
        if (ctrl.samples_per_decade <= 0) throw Error(ErrorKind::InvalidArgument, "samples_per_decade must be positive");
        const double start = std::max(t0, ctrl.t_min_sample);
        const int n = ctrl.samples_per_decade;
        // Anchored at powers of ten so runs with different t0 share sample times.
        for (long k = static_cast<long>(std::ceil(std::log10(start) * n - 1e-9));; ++k) {
            const double tk = std::pow(10.0, static_cast<double>(k) / n);
            if (tk >= t1 * (1.0 - 1e-12)) break;
            if (tk > t0 * (1.0 + 1e-12)) grid.push_back(tk);
        }
    }
    if (std::abs(grid.back() - t1) > 1e-12 * std::max(1.0, std::abs(t1))) {
        grid.push_back(t1);
    } else {
        grid.back() = t1;
    }
    return grid;
}

OdeOutput integrate_ode(const OdeRhs& rhs, const Vec& y0, double t0, double t1, const OdeControl& ctrl,
                        const StepObserver& observer) {
    if (!(ctrl.rtol > 0.0) || !(ctrl.atol >= 0.0)) throw Error(ErrorKind::InvalidArgument, "bad tolerances");
    if (!y0.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite initial state");
    const auto grid = output_grid(t0, t1, ctrl);
    OdeOutput out;
    out.t.reserve(grid.size());
    out.y.reserve(grid.size());
    out.t.push_back(t0);
    out.y.push_back(y0);

    const bool forward = t1 > t0;
    // Log-time right-hand side: dy/ds = t f(t, y) with t = e^s.
    const OdeRhs rhs_log = [&rhs](double s, const Vec& y, Vec& dy) {
        const double t = std::exp(s);
        rhs(t, y, dy);
        dy *= t;
    };
    const auto identity = [](double x) { return x; };
    const auto expo = [](double s) { return std::exp(s); };

    Stepper plain(rhs, ctrl, y0.size());
    Stepper logs(rhs_log, ctrl, y0.size());
    Vec y = y0;
    double t = t0;
    double h = ctrl.h_init > 0.0 ? (forward ? ctrl.h_init : -ctrl.h_init) : 0.0;
    bool in_log = false;

    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double target = grid[i];
        while (t != target) {
            const bool use_log = ctrl.log_time && forward && t >= 1.0;
            if (use_log) {
                if (!in_log) {
                    // h is dt; ds = dt / t at the switch.
                    h = h / t;
                    in_log = true;
                    logs.fsal_valid = false;
                }
                double s = std::log(t);
                const double s_end = std::log(target);
                if (h == 0.0) h = logs.initial_step(s, y, s_end);
                logs.advance(s, y, s_end, h, expo, observer);
                t = target;
            } else {
                const double stop = (ctrl.log_time && forward && t < 1.0 && target > 1.0) ? 1.0 : target;
                if (h == 0.0) h = (forward ? 1.0 : -1.0) * plain.initial_step(t, y, stop);
                plain.advance(t, y, stop, h, identity, observer);
                t = stop;
            }
        }
        out.t.push_back(target);
        out.y.push_back(y);
    }
    out.steps = plain.steps + logs.steps;
    out.rejected = plain.rejected + logs.rejected;
    return out;
}

} // namespace thomlab
